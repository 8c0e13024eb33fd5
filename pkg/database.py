import json
import logging
import pathlib

import aiosqlite

log = logging.getLogger(__name__)

MIGRATIONS_DIR = pathlib.Path(__file__).parent / "migrations"


class Database:
    """Run registry: every train/ablate run with its epoch log and final metrics."""

    def __init__(self, path: str) -> None:
        self.path = path
        self.db: aiosqlite.Connection | None = None

    async def connect(self) -> None:
        self.db = await aiosqlite.connect(self.path)
        await self.db.execute("PRAGMA journal_mode=WAL")
        await self.db.execute("PRAGMA foreign_keys=ON")
        await self._run_migrations()
        log.info("Database connected: %s", self.path)

    async def close(self) -> None:
        if self.db:
            await self.db.close()

    async def __aenter__(self) -> "Database":
        await self.connect()
        return self

    async def __aexit__(self, *exc) -> None:
        await self.close()

    async def _run_migrations(self) -> None:
        for sql_file in sorted(MIGRATIONS_DIR.glob("*.sql")):
            sql = sql_file.read_text()
            await self.db.executescript(sql)
            log.debug("Applied migration: %s", sql_file.name)

    # ── Runs ────────────────────────────────────────────────────────

    async def create_run(self, command: str, config: dict, label: str = "") -> int:
        cur = await self.db.execute(
            "INSERT INTO runs (command, label, seed, ablate, config_json) VALUES (?, ?, ?, ?, ?)",
            (
                command,
                label,
                int(config.get("seed", 0)),
                ",".join(config.get("ablate", ())),
                json.dumps(config, sort_keys=True),
            ),
        )
        await self.db.commit()
        return cur.lastrowid

    async def finish_run(self, run_id: int, status: str, checkpoint: str | None = None) -> None:
        await self.db.execute(
            "UPDATE runs SET status = ?, checkpoint = ?, finished_at = datetime('now') WHERE id = ?",
            (status, checkpoint, run_id),
        )
        await self.db.commit()

    async def list_runs(self, limit: int = 20) -> list[dict]:
        async with self.db.execute(
            "SELECT id, command, label, seed, ablate, status, checkpoint, started_at, finished_at "
            "FROM runs ORDER BY id DESC LIMIT ?",
            (limit,),
        ) as cur:
            rows = await cur.fetchall()
            cols = [d[0] for d in cur.description]
            return [dict(zip(cols, row)) for row in rows]

    # ── Epochs and metrics ──────────────────────────────────────────

    async def log_epoch(self, run_id: int, entry) -> None:
        await self.db.execute(
            "INSERT OR REPLACE INTO run_epochs "
            "(run_id, epoch, lr, train_loss, val_loss, val_f1_macro, val_mcc, swa_active) "
            "VALUES (?, ?, ?, ?, ?, ?, ?, ?)",
            (
                run_id,
                entry.epoch,
                entry.lr,
                entry.train_loss,
                entry.val_loss,
                entry.val_f1_macro,
                entry.val_mcc,
                int(entry.swa_active),
            ),
        )
        await self.db.commit()

    async def get_run_epochs(self, run_id: int) -> list[dict]:
        async with self.db.execute(
            "SELECT * FROM run_epochs WHERE run_id = ? ORDER BY epoch", (run_id,)
        ) as cur:
            rows = await cur.fetchall()
            cols = [d[0] for d in cur.description]
            return [dict(zip(cols, row)) for row in rows]

    async def store_metrics(
        self, run_id: int, split: str, variant: str, metrics: dict[str, float | None]
    ) -> None:
        await self.db.executemany(
            "INSERT OR REPLACE INTO run_metrics (run_id, split, variant, metric, value) "
            "VALUES (?, ?, ?, ?, ?)",
            [(run_id, split, variant, name, value) for name, value in metrics.items()],
        )
        await self.db.commit()

    async def get_run_metrics(self, run_id: int) -> dict[str, dict[str, float | None]]:
        """``{"test/swa": {"f1": ..., ...}, ...}`` for one run."""
        async with self.db.execute(
            "SELECT split, variant, metric, value FROM run_metrics WHERE run_id = ?",
            (run_id,),
        ) as cur:
            rows = await cur.fetchall()
            result: dict[str, dict[str, float | None]] = {}
            for split, variant, metric, value in rows:
                result.setdefault(f"{split}/{variant}", {})[metric] = value
            return result
