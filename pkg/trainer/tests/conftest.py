import subprocess
import sys
from types import SimpleNamespace

import pytest

from trainer import TrainSpec, generate, train_classifier, train_gan

KNOWN = (0, 1, 2, 3, 4, 5)


def run_openset(*args):
    """Invoke the consumer CLI; the file formats are the only coupling."""
    proc = subprocess.run(
        [sys.executable, "-m", "openset.cli", *args], capture_output=True, text=True
    )
    assert proc.returncode == 0, proc.stderr
    return proc


@pytest.fixture(scope="session")
def pipeline(tmp_path_factory):
    """One full desk-scale run shared by the test modules."""
    root = tmp_path_factory.mktemp("pipeline")
    spec = TrainSpec(
        dataset="synthetic", known_classes=KNOWN, epochs=2, gan_epochs=3, seed=0
    )
    net = train_classifier(spec, root)
    gan = train_gan(spec, root)
    mixtures = root / "mixtures.jsonl"
    run_openset("mix", "--classes", "6", "--count", "240", "--seed", "11",
                "--output", str(mixtures))
    gen_dump = generate(gan.checkpoint_path, mixtures, net.model_path, root, seed=5)
    selection = root / "selection.json"
    run_openset("select", "--generated", str(gen_dump), "--output", str(selection))
    netg = train_classifier(
        spec, root, candidate_ids_file=selection, images_dir=root / "images"
    )
    return SimpleNamespace(
        root=root, spec=spec, net=net, gan=gan, mixtures=mixtures,
        gen_dump=gen_dump, selection=selection, netg=netg,
    )
