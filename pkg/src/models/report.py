import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import pandas as pd


@dataclass
class RunReport:
    """Everything needed to reconstruct one training run from its input data."""
    config: Dict[str, Any]
    data: Dict[str, Any]
    train_mse: float
    test_mse: float
    trace: List[float]
    wall_seconds: float
    model: Dict[str, Any]
    refresh: Optional[Dict[str, Any]] = None
    he_params: Optional[Dict[str, Any]] = None

    def save(self, file_path: str | Path) -> None:
        Path(file_path).write_text(json.dumps(asdict(self), indent=2), encoding="utf-8")

    def save_trace(self, file_path: str | Path) -> None:
        """Per-iteration cost as a two-column CSV."""
        frame = pd.DataFrame({"iteration": range(1, len(self.trace) + 1), "cost": self.trace})
        frame.to_csv(file_path, index=False)


@dataclass
class BenchRow:
    """One line of the comparison table."""
    name: str
    algorithm: str
    encrypted: bool
    train_mse: float
    test_mse: float
    wall_seconds: float
    refreshes: Optional[int] = None
    trace: List[float] = field(default_factory=list, repr=False)


def save_bench(rows: List[BenchRow], out_dir: Path) -> Dict[str, Path]:
    """Write the comparison table (CSV + JSON) and a rectangular trace CSV."""
    out_dir.mkdir(parents=True, exist_ok=True)
    table = pd.DataFrame([{k: v for k, v in asdict(row).items() if k != "trace"} for row in rows])
    paths = {
        "table_csv": out_dir / "bench.csv",
        "table_json": out_dir / "bench.json",
        "traces_csv": out_dir / "bench_traces.csv",
    }
    table.to_csv(paths["table_csv"], index=False)
    paths["table_json"].write_text(json.dumps([asdict(row) for row in rows], indent=2), encoding="utf-8")
    traces = pd.DataFrame({row.name: pd.Series(row.trace, dtype=float) for row in rows})
    traces.insert(0, "iteration", range(1, len(traces) + 1))
    traces.to_csv(paths["traces_csv"], index=False)
    return paths
