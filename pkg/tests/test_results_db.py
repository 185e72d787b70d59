import asyncio

from hstjps.core.solver import EtaSolution
from hstjps.storage.results_db import ResultsDB

SOLUTION = EtaSolution(eta_star=5.2e7, residual=1e-3, iterations=48, bracket=(0.0, 1.44e8), tau_s=5e-4)


def _row(policy: str, throughput: float, ci: float = 1e5) -> dict:
    return {
        "policy": policy, "p_ts_dbm": 40.0, "p_tr_dbm": 33.0, "tau_s_s": 5e-4, "frames": 100, "seed": 1,
        "eta_star_bps": 5.2e7, "throughput_bps": throughput, "ci95_bps": ci,
    }


def test_solution_roundtrip(tmp_path):
    async def scenario():
        async with ResultsDB(tmp_path / "results.db") as db:
            assert await db.get_solution("abc") is None
            await db.put_solution("abc", SOLUTION)
            await db.put_solution("abc", SOLUTION)
            return await db.get_solution("abc")

    assert asyncio.run(scenario()) == SOLUTION


def test_rows_are_buffered_and_ordered(tmp_path):
    async def scenario():
        async with ResultsDB(tmp_path / "results.db") as db:
            run_id = await db.create_run("p_ts_dbm")
            db.add_row(run_id, 0, _row("hstjps", 5.1e7))
            db.add_row(run_id, 1, _row("no_wait_direct", 3.0e7, float("nan")))
            assert len(db.buffer) == 2
            await db.flush()
            assert len(db.buffer) == 0
            return await db.fetch_rows(run_id)

    rows = asyncio.run(scenario())
    assert [r["policy"] for r in rows] == ["hstjps", "no_wait_direct"]
    assert rows[0] == _row("hstjps", 5.1e7)
    assert rows[1]["ci95_bps"] is None


def test_close_flushes_pending_rows(tmp_path):
    path = tmp_path / "results.db"

    async def write():
        db = ResultsDB(path)
        await db.init()
        run_id = await db.create_run("tau_s")
        db.add_row(run_id, 0, _row("hstjps", 4.0e7))
        await db.close()
        return run_id

    async def read(run_id):
        async with ResultsDB(path) as db:
            return await db.fetch_rows(run_id)

    run_id = asyncio.run(write())
    assert len(asyncio.run(read(run_id))) == 1
