from typing import Optional, Tuple

import click

from app.constants import GAUSSIAN_CORRELATION, GAUSSIAN_DIMS, SPRING_DEFAULTS, SYNTHETIC_LENGTH
from app.models.config import Observable, ObservationLayout, SpringConfig
from app.services.detection_service import SIMULATION_KINDS, DetectionService


@click.command("simulate")
@click.option("--kind", type=click.Choice(SIMULATION_KINDS), required=True, help="變化類型，或 gaussian 區段")
@click.option("--length", type=int, default=SYNTHETIC_LENGTH, show_default=True, help="序列長度 T")
@click.option("--at", "at", type=int, multiple=True, help="變化點時間（可重複；預設 T/2）")
@click.option("--magnitude", type=float, default=0.5, show_default=True, help="speed / location 擾動大小")
@click.option("--segments", type=int, default=2, show_default=True, help="gaussian 區段數")
@click.option("--dims", type=int, default=GAUSSIAN_DIMS, show_default=True, help="gaussian 序列數 m")
@click.option("--correlation", type=float, default=GAUSSIAN_CORRELATION, show_default=True, help="gaussian 區段的相關係數")
@click.option("--particles", type=int, default=SPRING_DEFAULTS["n_particles"], show_default=True)
@click.option("--layout", type=click.Choice([item.value for item in ObservationLayout]), default="coordinate", show_default=True)
@click.option("--observable", "observables", type=click.Choice([item.value for item in Observable]), multiple=True, help="觀測量（可重複；預設 x）")
@click.option(
    "--preset",
    type=click.Choice(["default", "synthetic"]),
    default="default",
    show_default=True,
    help="彈簧參數組；synthetic 為基準測試使用的平衡起始設定",
)
@click.option("--noise-std", type=float, help=f"觀測雜訊標準差（預設依 preset，default 為 {SPRING_DEFAULTS['noise_std']}）")
@click.option("--seed", type=int, help="亂數種子（預設 RIO_CPD_SEED）")
@click.option("--output", type=click.Path(dir_okay=False), required=True, help="CSV 輸出路徑")
@click.option("--labels", type=click.Path(dir_okay=False), help="變化點 JSON 輸出路徑")
def simulate(
    kind: str,
    length: int,
    at: Tuple[int, ...],
    magnitude: float,
    segments: int,
    dims: int,
    correlation: float,
    particles: int,
    layout: str,
    observables: Tuple[str, ...],
    preset: str,
    noise_std: Optional[float],
    seed: Optional[int],
    output: str,
    labels: Optional[str],
):
    """產生帶標籤的合成序列（同一個 seed 輸出完全相同）"""
    fields = {
        "n_particles": particles,
        "layout": ObservationLayout(layout),
        "observables": tuple(Observable(name) for name in observables) or (Observable.X,),
    }
    if noise_std is not None:
        fields["noise_std"] = noise_std
    spring = SpringConfig.synthetic(**fields) if preset == "synthetic" else SpringConfig(**fields)
    stream = DetectionService.simulate(
        kind,
        length=length,
        at=at,
        magnitude=magnitude,
        segments=segments,
        dims=dims,
        correlation=correlation,
        spring=spring,
        seed=seed,
    )
    DetectionService.save_stream(stream, output, labels)
