"""
SQLite-based result storage with memory buffer
离线求得的 η* 按场景指纹存储，扫描结果按运行编号存储
"""

import time
from pathlib import Path

import aiosqlite

from ..core.solver import EtaSolution
from ..log import logger

# 扫描结果的列，与 CSV 列一致
ROW_COLUMNS = (
    "policy", "p_ts_dbm", "p_tr_dbm", "tau_s_s", "frames", "seed",
    "eta_star_bps", "throughput_bps", "ci95_bps",
)


class RowBuffer:
    """
    内存缓冲层
    积攒扫描结果行后批量写入 SQLite，减少磁盘 I/O
    """

    def __init__(self):
        self.rows: list[tuple] = []

    def add(self, run_id: int, seq: int, row: dict):
        self.rows.append((run_id, seq, *(row[c] for c in ROW_COLUMNS)))

    def clear(self):
        self.rows.clear()

    def __len__(self) -> int:
        return len(self.rows)


class ResultsDB:
    """
    SQLite 结果数据库
    """

    def __init__(self, db_path: Path):
        self.db_path = Path(db_path)
        self._conn: aiosqlite.Connection | None = None
        self.buffer = RowBuffer()

    async def init(self):
        """初始化数据库"""
        self.db_path.parent.mkdir(parents=True, exist_ok=True)
        self._conn = await aiosqlite.connect(str(self.db_path))
        await self._create_tables()

    async def close(self):
        """关闭数据库连接"""
        if self._conn:
            await self.flush()
            await self._conn.close()
            self._conn = None

    async def __aenter__(self) -> "ResultsDB":
        await self.init()
        return self

    async def __aexit__(self, *exc):
        await self.close()

    async def _create_tables(self):
        """创建数据表"""
        await self._conn.executescript("""
            -- 离线 η* 解
            CREATE TABLE IF NOT EXISTS eta_solutions (
                scenario_key TEXT PRIMARY KEY,
                eta_star REAL NOT NULL,
                residual REAL NOT NULL,
                iterations INTEGER NOT NULL,
                bracket_low REAL NOT NULL,
                bracket_high REAL NOT NULL,
                tau_s REAL NOT NULL,
                created INTEGER NOT NULL
            );

            -- 扫描运行
            CREATE TABLE IF NOT EXISTS sweep_runs (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                axis TEXT NOT NULL,
                created INTEGER NOT NULL
            );

            -- 扫描结果行
            CREATE TABLE IF NOT EXISTS sweep_rows (
                run_id INTEGER NOT NULL,
                seq INTEGER NOT NULL,
                policy TEXT NOT NULL,
                p_ts_dbm REAL NOT NULL,
                p_tr_dbm REAL NOT NULL,
                tau_s_s REAL NOT NULL,
                frames INTEGER NOT NULL,
                seed INTEGER NOT NULL,
                eta_star_bps REAL NOT NULL,
                throughput_bps REAL NOT NULL,
                ci95_bps REAL,
                PRIMARY KEY (run_id, seq)
            );
        """)
        await self._conn.commit()

    # ===== η* =====

    async def get_solution(self, key: str) -> EtaSolution | None:
        """按场景指纹读取 η*"""
        async with self._conn.execute("""
            SELECT eta_star, residual, iterations, bracket_low, bracket_high, tau_s
            FROM eta_solutions WHERE scenario_key = ?
        """, (key,)) as cursor:
            row = await cursor.fetchone()
        if row is None:
            return None
        logger.info(f"[HSTJPS] 复用已存储的 η* ({key[:12]})")
        return EtaSolution(
            eta_star=row[0], residual=row[1], iterations=row[2], bracket=(row[3], row[4]), tau_s=row[5],
        )

    async def put_solution(self, key: str, solution: EtaSolution):
        """保存 η*"""
        await self._conn.execute("""
            INSERT INTO eta_solutions
                (scenario_key, eta_star, residual, iterations, bracket_low, bracket_high, tau_s, created)
            VALUES (?, ?, ?, ?, ?, ?, ?, ?)
            ON CONFLICT(scenario_key) DO UPDATE SET
                eta_star = excluded.eta_star,
                residual = excluded.residual,
                iterations = excluded.iterations,
                bracket_low = excluded.bracket_low,
                bracket_high = excluded.bracket_high,
                tau_s = excluded.tau_s,
                created = excluded.created
        """, (
            key, solution.eta_star, solution.residual, solution.iterations,
            solution.bracket[0], solution.bracket[1], solution.tau_s, int(time.time()),
        ))
        await self._conn.commit()

    # ===== 扫描结果 =====

    async def create_run(self, axis: str) -> int:
        """创建新的扫描运行"""
        cursor = await self._conn.execute(
            "INSERT INTO sweep_runs (axis, created) VALUES (?, ?)", (axis, int(time.time()))
        )
        await self._conn.commit()
        return cursor.lastrowid

    def add_row(self, run_id: int, seq: int, row: dict):
        """写入内存缓冲"""
        self.buffer.add(run_id, seq, row)

    async def flush(self):
        """将缓冲行批量写入数据库"""
        if self._conn is None or not self.buffer:
            return
        placeholders = ", ".join("?" * (len(ROW_COLUMNS) + 2))
        await self._conn.executemany(
            f"INSERT OR REPLACE INTO sweep_rows (run_id, seq, {', '.join(ROW_COLUMNS)}) VALUES ({placeholders})",
            self.buffer.rows,
        )
        await self._conn.commit()
        logger.debug(f"[HSTJPS] 写入 {len(self.buffer)} 行扫描结果")
        self.buffer.clear()

    async def fetch_rows(self, run_id: int) -> list[dict]:
        """按写入顺序读取某次运行的结果行"""
        async with self._conn.execute(
            f"SELECT {', '.join(ROW_COLUMNS)} FROM sweep_rows WHERE run_id = ? ORDER BY seq", (run_id,)
        ) as cursor:
            rows = await cursor.fetchall()
        return [dict(zip(ROW_COLUMNS, row)) for row in rows]
