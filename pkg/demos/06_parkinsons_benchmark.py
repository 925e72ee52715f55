"""
Parkinson's telemonitoring benchmark
====================================

Forest learners on the Amplitude and Frequency voice-measure groups, 5-fold
cross-validation, all three ensembles. Needs ``parkinsons_updrs.data`` in
``$UABOOST_DATA_DIR``; the helper tries to download it otherwise.

Equivalent CLI call::

    uaboost benchmark --dataset parkinsons --learner forest --mode all --folds 5
"""

import sys

from uaboost.data import default_parkinsons_path, fetch_parkinsons
from uaboost.experiment import ExperimentConfig, run_benchmark

path = default_parkinsons_path()
if not path.exists():
    try:
        fetch_parkinsons(path)
    except OSError as exc:
        sys.exit(f"cannot find or download {path}: {exc}")

cfg = ExperimentConfig(dataset=f"parkinsons:{path}", learner="forest", mode="all", folds=5, trees=300)
result = run_benchmark(cfg)
report = result.report()

for row in report["rmse_table"]:
    print(f"{row['model']:<24} {row['mean']:.2f} ± {row['std']:.2f}")

metrics = result.metrics()
for mode in ("vanilla", "ua"):
    for m in ("Amplitude", "Frequency"):
        picps = [metrics[f"picp@{d}/{mode}/{m}"].mean for d in (1, 2, 3)]
        print(f"{mode:<8}{m:<10} MPIW {metrics[f'mpiw/{mode}/{m}'].mean:5.2f}  PICP "
              + " ".join(f"{p:6.2f}" for p in picps))
