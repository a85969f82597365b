import numpy as np
import pytest

from noisecutmix import (
    GenRecord,
    Provenance,
    SamplerConfig,
    generate_noisecutmix,
    generate_single,
    init_classifier,
    make_bump_dataset,
    make_cosine_schedule,
)
from noisecutmix.classifier import EpochStats
from noisecutmix.recordio import (
    load_classifier,
    read_pgm,
    read_provenance,
    read_records,
    save_classifier,
    write_history,
    write_pgm,
    write_provenance,
    write_records,
)


@pytest.fixture(scope="module")
def records():
    sched = make_cosine_schedule(200)
    models, _ = make_bump_dataset(2, 8, 8, 1.5, 0.25, seed=0, n_per_class=0)
    cfg = SamplerConfig(kind="dpm_solver_pp_2m", num_inference_steps=8)
    return [
        generate_single(0, cfg, sched, models, seed=1),
        generate_noisecutmix(0, 1, cfg, sched, models, 1.0, seed=2),
        generate_noisecutmix(1, 0, cfg, sched, models, 0.4, seed=3),
    ]


def test_records_round_trip(tmp_path, records):
    path = tmp_path / "batch.records"
    write_records(path, records)
    images, labels = read_records(path)
    assert images.shape == (3, 8, 8) and labels.shape == (3, 2)
    for i, rec in enumerate(records):
        assert np.array_equal(images[i], rec.image)
        assert np.array_equal(labels[i], rec.label)


def test_records_header(tmp_path, records):
    path = tmp_path / "batch.records"
    write_records(path, records)
    header = path.read_bytes().split(b"\n", 1)[0]
    assert header == b"NCMREC1 8 8 2 3"


def test_records_reject_garbage(tmp_path):
    path = tmp_path / "bad.records"
    path.write_bytes(b"WRONG 1 2 3 4\n")
    with pytest.raises(ValueError):
        read_records(path)


def test_provenance_round_trip(tmp_path, records):
    path = tmp_path / "batch.prov"
    write_provenance(path, records)
    provs = read_provenance(path)
    assert len(provs) == 3
    for rec, prov in zip(records, provs):
        assert prov == rec.provenance  # floats round-trip exactly via repr


def test_pgm_round_trip(tmp_path):
    pixels = np.arange(48, dtype=np.uint8).reshape(6, 8)
    path = tmp_path / "img.pgm"
    write_pgm(path, pixels, comments=["hello", "world"])
    back, comments = read_pgm(path)
    assert np.array_equal(back, pixels)
    assert comments == ["hello", "world"]


def test_pgm_rejects_non_uint8(tmp_path):
    with pytest.raises(ValueError):
        write_pgm(tmp_path / "x.pgm", np.zeros((4, 4)))


def test_classifier_round_trip(tmp_path):
    model = init_classifier(16, 8, 3, seed=9)
    path = tmp_path / "model.bin"
    save_classifier(path, model)
    back = load_classifier(path)
    assert back.seed == 9
    for name in ("w1", "b1", "w2", "b2"):
        assert np.array_equal(getattr(back, name), getattr(model, name))


def test_history_file(tmp_path):
    hist = [EpochStats(0, 1.25, 0.5), EpochStats(1, 0.75, 0.625)]
    path = tmp_path / "history.tsv"
    write_history(path, hist)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("#")
    assert lines[1] == "0\t1.25\t0.5"


def test_offline_record_construction(tmp_path):
    prov = Provenance(
        method="offline", class_a=1, class_b=None, lambda_sampled=None,
        lambda_real=1.0, rect=None, seed=0, sampler="-", steps=0, guidance=0.0, alpha=None,
    )
    rec = GenRecord(image=np.zeros((4, 4)), label=np.array([0.0, 1.0]), provenance=prov)
    write_records(tmp_path / "one.records", [rec])
    write_provenance(tmp_path / "one.prov", [rec])
    assert read_provenance(tmp_path / "one.prov")[0].method == "offline"
