from pathlib import Path
from typing import Callable, List

import numpy as np
import pandas as pd
import pytest

from app.services.manifold import SpdMatrix


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


def random_spd(rng: np.random.Generator, dim: int) -> SpdMatrix:
    """AᵀA + I，條件良好的隨機 SPD 矩陣"""
    a = rng.standard_normal((dim, dim))
    return SpdMatrix(a.T @ a + np.eye(dim))


@pytest.fixture
def spd_factory(rng) -> Callable[[int], SpdMatrix]:
    return lambda dim: random_spd(rng, dim)


@pytest.fixture
def write_csv(tmp_path: Path) -> Callable[..., Path]:
    """把 T×m 陣列寫成 CSV，回傳路徑"""

    def _write(values, name: str = "series.csv", columns: List[str] = None, sep: str = ",") -> Path:
        values = np.asarray(values, dtype=np.float64)
        columns = columns or [f"s{i}" for i in range(values.shape[1])]
        path = tmp_path / name
        pd.DataFrame(values, columns=columns).to_csv(path, index=False, sep=sep)
        return path

    return _write
