from app.commands.detection import detect, export_plot
from app.commands.evaluation import benchmark, evaluate
from app.commands.simulation import simulate

__all__ = ["detect", "export_plot", "simulate", "evaluate", "benchmark"]
