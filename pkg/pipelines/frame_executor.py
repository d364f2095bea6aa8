"""
Frame Executor - Parallelisme par frame
========================================

Execute des jobs par frame dans des threads (asyncio.to_thread), bornes par
un semaphore de `jobs` taches simultanees. Les resultats sont rendus dans
l'ordre des entrees, quel que soit l'ordre de terminaison.

Features:
- Erreurs re-levees avec le contexte de la frame (meme classe, meme code)
- Ecriture asynchrone des fichiers de sortie (aiofiles)

Author: Motion Cluster System
Date: 2025-11-24
"""

import asyncio
import logging
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, TypeVar, Union

import aiofiles

from core.errors import MotionClusterError, with_context

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


class FrameExecutor:
    """Pool de jobs par frame, resultats ordonnes"""

    def __init__(self, jobs: int = 1, name: str = "Frames"):
        """
        Args:
            jobs: Taches simultanees (>= 1)
            name: Tag des messages de log
        """
        self.jobs = max(1, int(jobs))
        self.name = name

    async def _run_one(self, semaphore: asyncio.Semaphore, fn: Callable[[T], R], item: T, context: str) -> R:
        async with semaphore:
            try:
                return await asyncio.to_thread(fn, item)
            except MotionClusterError as exc:
                raise with_context(exc, context) from exc

    async def map_async(self, fn: Callable[[T], R], items: Sequence[T],
                        contexts: Optional[Sequence[str]] = None) -> List[R]:
        """
        Applique fn a chaque element

        Args:
            fn: Job pur (thread-safe)
            items: Entrees
            contexts: Contexte d'erreur par entree ("frame <i>" par defaut)

        Returns:
            Resultats dans l'ordre de items
        """
        if contexts is None:
            contexts = [f"frame {i}" for i in range(len(items))]
        semaphore = asyncio.Semaphore(self.jobs)
        tasks = [self._run_one(semaphore, fn, item, ctx) for item, ctx in zip(items, contexts)]
        results = await asyncio.gather(*tasks)
        logger.debug("[%s] %d jobs done (jobs=%d)", self.name, len(results), self.jobs)
        return list(results)

    def map(self, fn: Callable[[T], R], items: Sequence[T], contexts: Optional[Sequence[str]] = None) -> List[R]:
        if self.jobs == 1:
            out = []
            for i, item in enumerate(items):
                try:
                    out.append(fn(item))
                except MotionClusterError as exc:
                    ctx = contexts[i] if contexts is not None else f"frame {i}"
                    raise with_context(exc, ctx) from exc
            return out
        return asyncio.run(self.map_async(fn, items, contexts))

    async def _write_one(self, semaphore: asyncio.Semaphore, path: Path, text: str) -> Path:
        async with semaphore:
            path.parent.mkdir(parents=True, exist_ok=True)
            async with aiofiles.open(path, "w", encoding="utf-8") as handle:
                await handle.write(text)
            return path

    async def write_files_async(self, files: Sequence[Tuple[Union[str, Path], str]]) -> List[Path]:
        semaphore = asyncio.Semaphore(self.jobs)
        return list(await asyncio.gather(*(self._write_one(semaphore, Path(p), text) for p, text in files)))

    def write_files(self, files: Sequence[Tuple[Union[str, Path], str]]) -> List[Path]:
        """Ecrit les fichiers (chemin, texte); le contenu ne depend pas de l'ordre d'ecriture"""
        paths = asyncio.run(self.write_files_async(files))
        logger.debug("[%s] %d files written", self.name, len(paths))
        return paths
