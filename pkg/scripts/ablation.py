"""Compare the full model with its no-CSR ablation on one fixture and noise case.

    python scripts/ablation.py --fixture squares64 --case 1 --background static
"""

import argparse
import time

from csrfbs import metrics
from csrfbs.background import make_background
from csrfbs.csr import CsrConfig
from csrfbs.fixtures import load_fixture
from csrfbs.noise import case_spec, degrade, derive_radii
from csrfbs.solver import SeparationProblem, SolverSettings, separate


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--fixture", default="squares64")
    ap.add_argument("--case", type=int, default=1, choices=(1, 2, 3))
    ap.add_argument("--background", default="static", choices=("static", "lowrank"))
    ap.add_argument("--lambda2", type=float, default=0.5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--max-outer", type=int, default=5)
    ap.add_argument("--max-inner", type=int, default=500)
    ap.add_argument("--refine-iters", type=int, default=3000)
    args = ap.parse_args()

    fx = load_fixture(args.fixture)
    spec = case_spec(args.case, args.seed)
    deg = degrade(fx.clean, spec)
    eps, eta_s = derive_radii(spec.sigma, spec.p_s, *fx.shape)
    stripe_mode = "time_invariant" if spec.stripe_amp > 0 else "off"
    settings = SolverSettings(max_outer=args.max_outer, max_inner=args.max_inner, refine_iters=args.refine_iters)
    fmap = metrics.threshold_map(fx.foreground, metrics.default_threshold(fx.foreground))

    print(f"{'model':<10} {'auc_f':>7} {'mpsnr_f':>8} {'mssim_f':>8} {'mpsnr_b':>8} {'mssim_b':>8} {'time':>7}")
    for label, ablation in (("csr", False), ("no-csr", True)):
        problem = SeparationProblem(deg.observed, eps, fx.eta_f, eta_s, args.lambda2,
                                    CsrConfig(fx.n_filters, fx.filter_size, init_seed=args.seed),
                                    make_background(args.background), stripe_mode, ablation_no_csr=ablation)
        t0 = time.perf_counter()
        res = separate(problem, settings)
        dt = time.perf_counter() - t0
        print(f"{label:<10} {metrics.auc(res.f, fmap):7.4f} {metrics.mpsnr(res.f, fx.foreground):8.3f} "
              f"{metrics.mssim(res.f, fx.foreground):8.4f} {metrics.mpsnr(res.b, fx.background):8.3f} "
              f"{metrics.mssim(res.b, fx.background):8.4f} {dt:6.1f}s")


if __name__ == "__main__":
    main()
