"""Accuracy versus token spend across decoding methods.

Runs guided search and the sampling baselines over the synthetic code-recovery
family at a few budgets, then prints the frontier CSV the `compare` command
produces from stored runs. Smaller than the acceptance protocol so it finishes
in a few seconds; bump PROBLEMS for tighter numbers.

Run:  python3 demos/efficiency_frontier.py
"""

from astar_decoding import ScaleControls
from astar_decoding.harness import export_frontier, run_benchmark
from astar_decoding.synthetic import CodeTaskFamily

PROBLEMS = 60
NOISE = 0.2

family = CodeTaskFamily(seed=0)
problems = family.problems(PROBLEMS)
print(f"{PROBLEMS} problems: recover a hidden {family.length}-digit code over "
      f"{{{','.join(family.alphabet)}}} from noisy progress scores\n")

summaries = []


def run(method, **kwargs):
    summary = run_benchmark(
        problems, method, policy=family.policy(), reward=family.oracle(NOISE), **kwargs
    )
    summaries.append(summary)
    print(f"{method:>18} budget {summary.budget_parameter:>3}: "
          f"accuracy {summary.accuracy:.3f}, mean tokens {summary.mean_tokens:7.1f}")


# Guided search at two frontier widths.
for k in (4, 16):
    run("astar", controls=ScaleControls(k=k, max_depth=10, breadth_cap=5, token_limit=512))

# Sampling baselines at matching and larger draw counts. Note the family's
# per-digit prior sits below chance, so the modal answer is systematically
# wrong: majority voting flatlines while reward-guided selection does not.
base = ScaleControls(token_limit=512)
run("pass_at_1", n=1, controls=base)
for n in (16, 64):
    run("best_of_n", n=n, controls=base)
    run("self_consistency", n=n, controls=base)
run("particle_filtering", num_particles=16, controls=ScaleControls(max_depth=10, token_limit=512))

print("\nfrontier CSV (what `astar-decode compare` writes):\n")
print(export_frontier(summaries), end="")
