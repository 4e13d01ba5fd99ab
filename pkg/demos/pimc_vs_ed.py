"""Path-integral Monte Carlo against exact diagonalisation at N = 8.

Runs the discrete-time (Trotter) chain and the continuous-time chain and
compares the moments of the time-averaged magnetisation with ED.
"""
from qcw.circle import ModelParams
from qcw.ed import path_moments
from qcw.pimc import ChainConfig, McParams, run_chain

for lam, beta in [(0.5, 3.0), (1.5, 1.0)]:
    params = ModelParams(beta, lam=lam)
    exact = path_moments(params, 8)
    print(f"lambda = {lam}, beta = {beta}: ED <q^2> = {exact[1]:.4f}, <q^4> = {exact[3]:.4f}")
    for sampler in ["trotter", "ct"]:
        stats = run_chain(ChainConfig(params, 8, 128), McParams(40_000, 1000, seed=1, sampler=sampler))
        print(f"  {sampler:8s} <q^2> = {stats.q2.mean:.4f} +- {stats.q2.stderr:.4f}"
              f"   <q^4> = {stats.q4.mean:.4f} +- {stats.q4.stderr:.4f}   U4 = {stats.binder.mean:.3f}")
