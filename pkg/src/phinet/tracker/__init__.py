from .boxes import Detection, iou, iou_matrix
from .assignment import hungarian
from .kalman import KalmanConfig, Track, kalman_predict, kalman_update, new_track
from .sort import SortTracker, IouTracker, run_tracker
from .metrics import MotScore, score
