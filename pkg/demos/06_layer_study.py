"""Final error versus mesh depth, with and without coupler loss."""

from dataclasses import replace
from importlib import resources

from mzinet import layer_study, parse_design_spec
from mzinet.designspec import Physics
from mzinet.tolerance import min_over_seeds

spec = parse_design_spec(resources.files("mzinet") / "data" / "splitter_50_50.yaml")
for loss in (0.02, 0.0):
    run = replace(spec, physics=Physics(insertion_loss_db=loss))
    best = min_over_seeds(layer_study(run, [2, 3, 4, 6], seeds_per_count=3))
    # every coupler costs power, so with loss the error floor rises with depth
    print(f"insertion loss {loss} dB:", {m: f"{j:.2e}" for m, j in sorted(best.items())})
