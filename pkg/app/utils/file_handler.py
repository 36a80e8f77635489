import configparser
import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import aiofiles
import pandas as pd
from loguru import logger

from app.coding.gf2 import BinMatrix
from app.utils.log_sinks import add_file_sink


class FileHandler:
    """Flat-file I/O: matrix text files, sweep CSVs, INI configs and pair exports."""

    def __init__(self):
        add_file_sink("file_handler")
        self.supported_extensions = ['.csv', '.txt', '.ini', '.cfg', '.json']

    async def read_matrix(self, file_path: Union[str, Path]) -> BinMatrix:
        """Read a matrix in the ``rows cols`` + 0/1 lines text format."""
        try:
            async with aiofiles.open(Path(file_path), mode='r') as file:
                text = await file.read()
            return BinMatrix.from_text(text)
        except Exception as e:
            logger.error(f"Failed to read matrix {file_path}: {str(e)}")
            raise

    async def write_matrix(self, matrix: BinMatrix, file_path: Union[str, Path]) -> Path:
        file_path = Path(file_path)
        file_path.parent.mkdir(parents=True, exist_ok=True)
        async with aiofiles.open(file_path, mode='w', newline='') as file:
            await file.write(matrix.to_text())
        return file_path

    async def save_results(self, results: Union[List[Dict], pd.DataFrame], output_path: Union[str, Path],
                           columns: Optional[List[str]] = None) -> Path:
        """Save result rows to CSV with a fixed column order."""
        try:
            df = results if isinstance(results, pd.DataFrame) else pd.DataFrame(results, columns=columns)
            if columns is not None:
                df = df[columns]
            output_path = Path(output_path)
            if output_path.suffix.lower() != '.csv':
                raise ValueError(f"Unsupported output format: {output_path.suffix}")
            output_path.parent.mkdir(parents=True, exist_ok=True)

            csv_data = df.to_csv(index=False, lineterminator='\n', float_format='%.10g', na_rep='n/a')
            async with aiofiles.open(output_path, mode='w', newline='') as file:
                await file.write(csv_data)
            logger.info(f"Wrote {len(df)} rows to {output_path}")
            return output_path

        except Exception as e:
            logger.error(f"Failed to save results to {output_path}: {str(e)}")
            raise

    async def read_results(self, file_path: Union[str, Path]) -> pd.DataFrame:
        file_path = Path(file_path)
        if not file_path.exists():
            raise FileNotFoundError(f"no results at {file_path}")
        return pd.read_csv(file_path, na_values=['n/a'])

    async def read_config(self, file_path: Union[str, Path]) -> Dict[str, Dict[str, str]]:
        """Read an INI-style file into ``{section: {key: value}}``."""
        file_path = Path(file_path)
        if file_path.suffix.lower() not in self.supported_extensions:
            raise ValueError(f"Unsupported file format: {file_path.suffix}")
        async with aiofiles.open(file_path, mode='r') as file:
            text = await file.read()
        parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        parser.read_string(text, source=str(file_path))
        return {section: dict(parser[section]) for section in parser.sections()}

    async def export_pair(self, h1: BinMatrix, h2: BinMatrix, header: Dict[str, Any],
                          output_dir: Union[str, Path], stem: str) -> List[Path]:
        """Write h1, h2 and a JSON header describing the pair."""
        output_dir = Path(output_dir)
        paths = [
            await self.write_matrix(h1, output_dir / f"{stem}.h1.txt"),
            await self.write_matrix(h2, output_dir / f"{stem}.h2.txt"),
        ]
        header_path = output_dir / f"{stem}.json"
        async with aiofiles.open(header_path, mode='w') as file:
            await file.write(json.dumps(header, indent=2, sort_keys=True) + "\n")
        paths.append(header_path)
        return paths
