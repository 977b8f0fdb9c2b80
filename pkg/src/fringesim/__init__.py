"""Fringe-perturbation simulation, black-box attack search, and defense.

Models an on-off keyed light source captured by a rolling-shutter sensor,
turning fast intensity modulation into banding patterns on the captured
image. On top of the simulator sit a grid search for attack parameters
against pluggable detector/embedder oracles and a notch-filter repair.
"""

from .attack import (
    AttackResult,
    DodgingAttackSearch,
    DosAttackSearch,
    OracleError,
    SearchSpace,
    dodging_loss,
    dos_loss,
    grid_search_dodging,
    grid_search_dos,
    success_rate_dodging,
    success_rate_dos,
)
from .bridge import (
    AdapterClient,
    AdapterError,
    AdapterProtocolError,
    AdapterRemoteError,
    AdapterTimeoutError,
    AdapterUnavailableError,
)
from .defense import (
    ButterworthNotchDefense,
    FilterSpec,
    FringeEstimationError,
    bandstop_gain,
    butterworth_notch,
    estimate_fringe_frequency,
    evaluate_defense,
    notch_suppression_db,
)
from .detectors import (
    DetectorVerdict,
    Embedding,
    FringeRunDetector,
    ProfileEmbedder,
    VerifierConfig,
    feature_distance,
    fringe_run_verdict,
    profile_embedding,
)
from .io import (
    ImageFormatError,
    Manifest,
    ManifestEntry,
    load_image,
    save_image,
    synth_face,
)
from .perturb import (
    FringePerturber,
    PerturbationParams,
    fringe_to_pulse,
    measure_run_lengths,
    measure_tilt,
    pulse_to_fringe,
    render_adversarial,
    theta_to_signal,
)
from .sensor import (
    DEFAULT_INTERLINE_DELAY_US,
    Pattern,
    SensorConfig,
    expose,
    gain_profile_at,
    render_pattern,
    row_gain,
)
from .signal import (
    FLICKER_FUSION_HZ,
    PulseParams,
    check_imperceptible,
    integrate_level,
    level_at,
    on_overlap,
)

__version__ = "0.1.0"
