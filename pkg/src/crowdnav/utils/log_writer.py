"""Async writers for episode logs and result tables."""

import json
import os
from io import StringIO
from typing import Any, Dict, Iterable, List, Optional

import aiofiles
import pandas as pd

from ..models.experiment import CSV_COLUMNS, EpisodeResult


class ResultWriter:
    """Writes raw episode CSVs, JSON-lines trajectories and text tables."""

    def __init__(self, output_dir: str) -> None:
        self.output_dir = output_dir

    def _path(self, name: str, subdirectory: Optional[str] = None) -> str:
        directory = os.path.join(self.output_dir, subdirectory) if subdirectory else self.output_dir
        os.makedirs(directory, exist_ok=True)
        return os.path.join(directory, name)

    async def write_episode_csv(self, results: Iterable[EpisodeResult], name: str = "episodes.csv") -> str:
        """Write one row per episode in the fixed column order."""
        frame = pd.DataFrame([r.csv_row() for r in results], columns=CSV_COLUMNS)
        return await self.write_text(frame.to_csv(index=False, lineterminator="\n"), name)

    async def write_jsonl(
        self, records: Iterable[Dict[str, Any]], name: str, subdirectory: Optional[str] = None
    ) -> str:
        """Write records as JSON lines (one object per line, keys sorted)."""
        output_path = self._path(name, subdirectory)
        async with aiofiles.open(output_path, 'w', encoding='utf-8') as file:
            for record in records:
                await file.write(json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n")
        return output_path

    async def write_trajectory(self, result: EpisodeResult) -> str:
        name = f"{result.planner.value}_p{result.population}_t{result.trial}_{result.seed}.jsonl"
        return await self.write_jsonl(result.trajectory, name, subdirectory="trajectories")

    async def write_frame(self, frame: pd.DataFrame, name: str) -> str:
        return await self.write_text(frame.to_csv(index=False, lineterminator="\n"), name)

    async def write_text(self, text: str, name: str) -> str:
        output_path = self._path(name)
        async with aiofiles.open(output_path, 'w', encoding='utf-8') as file:
            await file.write(text)
        return output_path


async def read_episode_csv(csv_file_path: str) -> pd.DataFrame:
    """Load a raw episode CSV written by ResultWriter."""
    if not os.path.exists(csv_file_path):
        raise FileNotFoundError(f"CSV file not found: {csv_file_path}")
    async with aiofiles.open(csv_file_path, 'r', encoding='utf-8') as file:
        content = await file.read()
    frame = pd.read_csv(StringIO(content))
    missing = [c for c in CSV_COLUMNS if c not in frame.columns]
    if missing:
        raise ValueError(f"{csv_file_path} is missing columns: {', '.join(missing)}")
    return frame


async def read_jsonl(path: str) -> List[Dict[str, Any]]:
    async with aiofiles.open(path, 'r', encoding='utf-8') as file:
        content = await file.read()
    return [json.loads(line) for line in content.splitlines() if line.strip()]
