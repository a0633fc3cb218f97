import pytest

from soundseg.config import load_config
from soundseg.fixtures import FixtureSpec, generate_fixtures
from soundseg.ontology import default_alias_path, load_alias_table
from soundseg import synthesis

TINY_OVERRIDES = [
    "model.c_av=16",
    "model.dim=16",
    "model.num_queries=4",
    "model.heads=2",
    "model.l_enc=1",
    "model.l_dec=1",
    "model.c_m=8",
    "model.c_a=16",
    "model.visual_channels=4 8 12 16",
    "optim.batch_size=2",
    "optim.lr=1e-3",
]


@pytest.fixture(scope="session")
def tiny_config():
    return load_config(overrides=TINY_OVERRIDES)


def build_manifest(root, n_images=8, seed=0, classes=("disk", "square"),
                   instances=(1, 1), style="synthetic", test_frac=0.25):
    """Generate a fixture corpus under root and compose its triplet manifest."""
    spec = FixtureSpec(classes=classes, instances_per_image=instances, style=style)
    paths = generate_fixtures(spec, n=n_images, seed=seed, out_dir=root)
    table = load_alias_table(default_alias_path())
    visual = synthesis.collect_visual(
        synthesis.iter_coco_instances(paths["visual_json"], dataset="fixture_visual"), table
    )
    audio = synthesis.collect_audio(
        synthesis.iter_audio_csv(paths["audio_csv"], dataset="fixture_audio"), table
    )
    triplets = synthesis.compose_triplets(visual.records, audio.records, seed=seed)
    return synthesis.split_manifest(triplets, test_frac, seed=seed)


@pytest.fixture(scope="session")
def fixture_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    manifest = build_manifest(root)
    return root, manifest
