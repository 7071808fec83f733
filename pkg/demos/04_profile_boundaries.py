"""Error-vs-rank profile of a real repository CPT against a random control.

Profiles the hailfinder "Boundaries" table (3 states, parents of
cardinalities 3, 4, 3) next to a random CPT of identical dimensions.
The real table's error falls much faster at first, but because this CPT
was expert-elicited with almost every parent configuration getting its
own distribution (32 distinct rows out of 36), it still needs a fairly
high rank before the maximum error drops below 0.001.

Runs in a couple of minutes; lower --rmax below to make it faster.
"""

from pathlib import Path

from cptrank import AnalysisConfig, SolverConfig
from cptrank.report import profile_single

NET = Path(__file__).parent.parent / "tests" / "networks" / "hailfinder.net"

cfg = AnalysisConfig(
    epsilon=0.001,
    r_max=8,
    solver=SolverConfig(n_random_starts=10, use_nvec_start=True, seed=42),
)
profile, control = profile_single(NET, "Boundaries", cfg, with_control=True)

print(f"Boundaries CPT dims: {'x'.join(str(d) for d in profile.dims)}")
print(f"{'rank':>4} {'cpt max_error':>14} {'control max_error':>18}")
for real, rnd in zip(profile.entries, control.entries):
    print(f"{real.rank:>4} {real.max_error:>14.4e} {rnd.max_error:>18.4e}")
