import numpy as np

from stpool_eeg import plotting
from stpool_eeg.coords import transform
from stpool_eeg.harness import AblationRow, metrics_from_predictions

PNG = b"\x89PNG\r\n\x1a\n"


def test_figures_are_written_and_stable(tmp_path, montage32):
    cmap = transform(montage32, "azimuthal")
    m = metrics_from_predictions([0, 1, 1, 0], [0, 1, 0, 0], 2)
    m.loss_curve, m.val_curve, m.best_epoch = [0.9, 0.6, 0.5], [0.5, 0.75, 0.75], 1
    rows = [AblationRow("mixer", "stpool", 0, 1, 0.8, 0.7), AblationRow("mixer", "none", 0, 2, 0.7, 0.65)]
    jobs = {
        "coords.png": lambda p: plotting.plot_coordinate_map(cmap, p),
        "seq.png": lambda p: plotting.plot_sequence(np.random.default_rng(0).standard_normal((20, 8, 8)), p),
        "curves.png": lambda p: plotting.plot_training_curves(m, p),
        "conf.png": lambda p: plotting.plot_confusion(m, p, ["L", "R"]),
        "abl.png": lambda p: plotting.plot_ablation(rows, p),
    }
    for name, job in jobs.items():
        first, second = tmp_path / "a" / name, tmp_path / "b" / name
        job(first)
        job(second)
        assert first.read_bytes().startswith(PNG)
        assert first.read_bytes() == second.read_bytes()
