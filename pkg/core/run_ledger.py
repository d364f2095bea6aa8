"""
Run Ledger - Historique SQLite des executions
==============================================

Journal persistant des commandes lancees (gen, train, label, eval, ...).
Chaque execution est identifiee par l'empreinte SHA-256 de sa config.
Le journal n'influence jamais les resultats.

Features:
- Recherche par commande, fenetre temporelle, mot-cle
- Indexation sur commande et horodatage
- Statistiques globales (nombre de runs, echecs, derniere activite)

Author: Motion Cluster System
Date: 2025-11-24
"""

import json
import logging
import sqlite3
from datetime import datetime, timedelta
from pathlib import Path
from typing import Dict, List, Optional

logger = logging.getLogger(__name__)

DEFAULT_LEDGER = "data/motion_cluster_runs.db"


class RunLedger:
    """
    Journal SQLite des executions

    Table:
    - runs: commande, empreinte de config, graine, statut, resume, metadonnees
    """

    def __init__(self, db_path: Optional[str] = None):
        """
        Args:
            db_path: Chemin de la base (":memory:" pour les tests)
        """
        if db_path is None:
            db_path = DEFAULT_LEDGER
        if db_path != ":memory:":
            Path(db_path).parent.mkdir(parents=True, exist_ok=True)

        self.db_path = db_path
        self.conn = sqlite3.connect(db_path, check_same_thread=False)
        self.conn.row_factory = sqlite3.Row
        self._init_schema()
        logger.debug("[RunLedger] Initialized at %s", db_path)

    def _init_schema(self):
        cursor = self.conn.cursor()
        cursor.execute("""
            CREATE TABLE IF NOT EXISTS runs (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                command TEXT NOT NULL,
                config_digest TEXT NOT NULL,
                seed INTEGER,
                status TEXT DEFAULT 'completed',
                summary TEXT,
                metadata TEXT,
                timestamp TEXT NOT NULL
            )
        """)
        cursor.execute("CREATE INDEX IF NOT EXISTS idx_runs_command ON runs(command)")
        cursor.execute("CREATE INDEX IF NOT EXISTS idx_runs_timestamp ON runs(timestamp DESC)")
        self.conn.commit()

    def record_run(self, command: str, config_digest: str, seed: Optional[int] = None,
                   status: str = "completed", summary: str = "", metadata: Optional[Dict] = None) -> int:
        """
        Enregistre une execution

        Args:
            command: Sous-commande CLI
            config_digest: Empreinte SHA-256 de la config
            seed: Graine globale
            status: completed, failed
            summary: Resume lisible (une ligne)
            metadata: Details additionnels (dict JSON)

        Returns:
            ID du run
        """
        cursor = self.conn.cursor()
        cursor.execute(
            """
            INSERT INTO runs (command, config_digest, seed, status, summary, metadata, timestamp)
            VALUES (?, ?, ?, ?, ?, ?, ?)
            """,
            (command, config_digest, seed, status, summary,
             json.dumps(metadata or {}, sort_keys=True), datetime.now().isoformat()),
        )
        self.conn.commit()
        return cursor.lastrowid

    @staticmethod
    def _row(row: sqlite3.Row) -> Dict:
        return {
            "id": row["id"],
            "command": row["command"],
            "config_digest": row["config_digest"],
            "seed": row["seed"],
            "status": row["status"],
            "summary": row["summary"],
            "metadata": json.loads(row["metadata"]) if row["metadata"] else {},
            "timestamp": row["timestamp"],
        }

    def recall_runs(self, command: Optional[str] = None, days: Optional[int] = None, limit: int = 10) -> List[Dict]:
        """
        Runs recents, du plus recent au plus ancien

        Args:
            command: Filtrer par commande (None = toutes)
            days: Limiter aux X derniers jours
            limit: Nombre max de resultats
        """
        query = "SELECT * FROM runs WHERE 1=1"
        params: list = []
        if command:
            query += " AND command = ?"
            params.append(command)
        if days is not None:
            query += " AND timestamp > ?"
            params.append((datetime.now() - timedelta(days=days)).isoformat())
        query += " ORDER BY timestamp DESC, id DESC LIMIT ?"
        params.append(limit)
        cursor = self.conn.cursor()
        cursor.execute(query, params)
        return [self._row(row) for row in cursor.fetchall()]

    def search(self, keyword: str, limit: int = 10) -> List[Dict]:
        """Runs dont le resume ou les metadonnees contiennent le mot-cle"""
        cursor = self.conn.cursor()
        cursor.execute(
            """
            SELECT * FROM runs
            WHERE summary LIKE ? OR metadata LIKE ? OR command LIKE ?
            ORDER BY timestamp DESC, id DESC
            LIMIT ?
            """,
            (f"%{keyword}%", f"%{keyword}%", f"%{keyword}%", limit),
        )
        return [self._row(row) for row in cursor.fetchall()]

    def get_stats(self) -> Dict:
        """
        Returns:
            {runs_count, failed_count, commands, last_activity}
        """
        cursor = self.conn.cursor()
        cursor.execute("SELECT COUNT(*) AS count FROM runs")
        runs_count = cursor.fetchone()["count"]
        cursor.execute("SELECT COUNT(*) AS count FROM runs WHERE status != 'completed'")
        failed_count = cursor.fetchone()["count"]
        cursor.execute("SELECT DISTINCT command FROM runs ORDER BY command")
        commands = [row["command"] for row in cursor.fetchall()]
        cursor.execute("SELECT MAX(timestamp) AS last FROM runs")
        last_activity = cursor.fetchone()["last"]
        return {
            "runs_count": runs_count,
            "failed_count": failed_count,
            "commands": commands,
            "last_activity": last_activity,
        }

    def close(self):
        if self.conn:
            self.conn.close()
            self.conn = None
            logger.debug("[RunLedger] Connection closed")
