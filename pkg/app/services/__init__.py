from app.services.detection_service import DetectionService
from app.services.detector import RioDetector
from app.services.pipeline import DetectionPipeline, detect_frame

__all__ = ["DetectionService", "RioDetector", "DetectionPipeline", "detect_frame"]
