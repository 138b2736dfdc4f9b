"""houndkit: locating crypto-primitive executions in frequency-scaled
side-channel power traces.

The pipeline is split the same way the tooling is used: synthesize labeled
traces (`synth`), build a balanced window dataset (`dataset`), train the
three-class window classifier (`nn`), locate CP starts in unseen traces
(`locator`), and score against ground truth or the matched-filter baseline
(`evalkit`).  See the `cli` module or the `houndkit` command for the
end-to-end entry points.
"""

from .dataset import WindowDataset, build_dataset, label_cipher_trace, sample_noise_windows
from .evalkit import (
    HitsReport,
    IoUReport,
    confusion_matrix,
    iou,
    matched_filter_locate,
    score_locations,
)
from .locator import (
    CpLocations,
    ScreenConfig,
    SegmentationTrack,
    align,
    classify_track,
    extract_starts,
    majority_filter,
    refine,
    screen,
    sliding_windows,
)
from .presets import PRESETS, ExperimentConfig, get_preset
from .synth import (
    CpTemplate,
    FrequencyPool,
    SynthConfig,
    apply_dfs,
    compose_trace,
    default_freq_pool,
    make_cp_template,
    make_freq_pool,
    synth_noise_segment,
)
from .trace import (
    GroundTruth,
    LabeledWindow,
    Trace,
    WindowLabel,
    extract_window,
    load_trace,
    save_trace,
    standardize_window,
)

__version__ = "0.1.0"
