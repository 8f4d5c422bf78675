import json

import numpy as np
import pytest

from swinvib.bottleneck import VibClassifier
from swinvib.features import SyntheticSpec, generate_synthetic, read_feature_file
from swinvib.filtering import LayerEnsemble


@pytest.fixture(scope="session")
def small_synth(tmp_path_factory):
    """A quick 2-layer synthetic dataset shared by filter/sweep/CLI tests."""
    out = tmp_path_factory.mktemp("small-synth")
    spec = SyntheticSpec(n_layers=2, feature_dim=16, cluster_separation=8.0,
                         noise_scale=1.0, mixed_fraction=0.5, seed=21)
    manifest_path = generate_synthetic(spec, out, n_train=400, n_eval=200)
    return spec, manifest_path, json.loads(manifest_path.read_text())


@pytest.fixture(scope="session")
def small_ensemble(small_synth):
    spec, manifest_path, manifest = small_synth
    models = []
    for entry in manifest["files"]:
        loaded = read_feature_file(manifest_path.parent / entry["path"])
        clf = VibClassifier(epochs=12, batch_size=64, seed=3, eval_every=6)
        clf.fit(loaded.features.astype(np.float64), loaded.labels)
        assert min(clf.fold_aucs_) > 0.95
        models.append(clf.model_)
    return LayerEnsemble.from_models(models)
