"""Activation-peak detection and analysis toolkit.

The pipeline: load (or synthesize) frame-by-channel activation maps,
collapse each frame to an L2 energy envelope, smooth-and-differentiate
with a derivative-of-Gaussian kernel, pick sharp zero crossings as peaks,
then score the peaks as phone-boundary hypotheses and study their
embedding vectors with PCA, k-means, and adjusted mutual information.
"""

from .ablation import AblationMask, ablation_stats, apply_mask, build_mask
from .boundary_eval import (
    EvalConfig,
    EvalResult,
    GridResult,
    evaluate_corpus,
    evaluate_utterance,
    grid_search,
    match_boundaries,
)
from .convnet import ActivationMap, ConvStack, LayerSpec, forward, load_stack, receptive_field
from .envelope import (
    DoGKernel,
    Envelope,
    Peak,
    PeakSet,
    compute_envelope,
    detect,
    dog_filter,
    make_dog_kernel,
    pick_peaks,
)
from .frontend import MelConfig, Spectrogram, mel_filterbank, melspec
from .ingest import PhoneSegment, PhoneTier, Waveform, read_phn, read_wav, tier_boundaries
from .phones import PhoneMapping, identity_mapping, load_default
from .synth import SynthConfig, SynthCorpus, generate, materialize
from .tensorio import CorpusManifest, ManifestEntry, read_manifest, read_tensor, write_manifest, write_tensor
from .units import (
    Clustering,
    LabeledPeakEmbedding,
    PcaModel,
    adjusted_mutual_information,
    ami_sweep,
    arity_fractions,
    kmeans,
    label_corpus,
    label_peak,
    pca_fit,
    pca_project,
)

__version__ = "0.1.0"
