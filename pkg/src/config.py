"""Engine configuration: JSON defaults, overridden by environment variables."""
import json
import os
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError

from src.errors import ConfigError

load_dotenv()

PACKAGE_DIR = Path(__file__).parent
DEFAULT_CONFIG_FILE = PACKAGE_DIR / "engine_config.json"


class BenchDefaults(BaseModel):
    disjunctive_negation_sizes: List[int] = [10_000, 100_000, 1_000_000]
    disjunctive_negation_list_size: int = Field(1000, ge=1)
    xor_chain_depths: List[int] = list(range(1, 21))
    xor_chain_universe: int = Field(100_000, ge=1)
    xor_chain_list_size: int = Field(200, ge=1)
    xor_chain_max_tree_nodes: int = Field(1 << 16, ge=1)
    net_positive_universe: int = Field(10_000, ge=1)
    net_positive_topic_terms: int = Field(32, ge=1)


class EngineSettings(BaseModel):
    max_sum_width: int = Field(32, ge=1, le=64)
    expansion_limit: int = Field(1 << 22, ge=1)
    tree_work_limit: int = Field(50_000_000, ge=1)
    seed: int = 20240611
    log_dir: str = "logs"
    database_path: str = "bench_history.db"
    bench: BenchDefaults = BenchDefaults()


def load_settings(config_file: Optional[Path] = None) -> EngineSettings:
    """Read the JSON config and apply environment overrides."""
    path = Path(config_file or os.getenv("PNRETRIEVE_CONFIG") or DEFAULT_CONFIG_FILE)
    try:
        with open(path, "r") as f:
            raw = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e

    # Environment wins over the file
    if os.getenv("PNRETRIEVE_DB_PATH"):
        raw["database_path"] = os.getenv("PNRETRIEVE_DB_PATH")
    if os.getenv("PNRETRIEVE_LOG_DIR"):
        raw["log_dir"] = os.getenv("PNRETRIEVE_LOG_DIR")
    if os.getenv("PNRETRIEVE_SEED"):
        raw["seed"] = os.getenv("PNRETRIEVE_SEED")

    try:
        return EngineSettings.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"invalid config {path}: {e}") from e


SETTINGS = load_settings()
