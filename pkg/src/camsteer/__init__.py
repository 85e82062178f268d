"""camsteer: human-in-the-loop attention steering for multi-label image classifiers.

Workflow: ingest a multi-label dataset, train a one-vs-rest CNN, surface
Grad-CAM explanations ranked by how suspicious they are, collect expert
polygon corrections, and fine-tune with a frequency-weighted joint
prediction + attention loss, round after round.
"""

from .data import (
    CoOccurrenceMatrix,
    DatasetManifest,
    ImageRecord,
    LabelStats,
    compute_cooccurrence,
    compute_label_stats,
    load_dataset,
    load_manifest,
    proportional_subsample,
    save_manifest,
    split_dataset,
)
from .models import (
    ModelConfig,
    MultiLabelModel,
    PredictionVector,
    TrainingParams,
    bce_prediction_loss,
    build_model,
    load_checkpoint,
    predict,
    predict_dataset,
    save_checkpoint,
    train,
)
from .gradcam import Heatmap, cam_resolution, grad_cam, normalize_heatmap, render_overlay
from .annotations import (
    AttentionMask,
    Polygon,
    PolygonAnnotation,
    heatmap_to_polygons,
    rasterize,
    validate_polygon,
)
from .finetune import (
    FineTuneBatch,
    FineTuneItem,
    LossWeights,
    attention_loss,
    dynamic_weights,
    finetune_round,
    joint_loss,
)
from .ranking import (
    RankingMode,
    RankingScore,
    accuracy_deviation_score,
    concentration_score,
    dependency_score,
    image_dependency_score,
    inverse_frequency,
    rank_images,
)
from .metrics import (
    ConfusionCounts,
    MetricsReport,
    RoundHistory,
    auc,
    confusion,
    f1,
    per_round_report,
    precision,
    recall,
    report_for_label,
)

__version__ = "0.1.0"
