from .checkpoint import Checkpoint, content_hash, load_checkpoint, load_weights, save_checkpoint  # noqa
from .codec import PatchCodec  # noqa
from .dataset import ClipSample, SynthDataset  # noqa
from .infer import InferResult, infer, output_frame_count  # noqa
from .manifest import RunManifest, read_manifest, write_manifest  # noqa
from .synth import DatasetManifest, synth_dataset  # noqa
from .train import TrainResult, init_stage2, train_stage1, train_stage2  # noqa
