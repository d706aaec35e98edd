"""Where do the parameters and MACs of each variant go?

Builds the four canonical N=1024 models, prints the per-layer cost table
and checks that the analytic counts agree with a MAC-counting forward.
"""
from nes2net import VARIANTS, build_model, canonical_config, profile, verify_counts

FRAMES = 200

for variant in VARIANTS:
    model = build_model(canonical_config(variant), seed=0)
    report = profile(model, frames=FRAMES)
    print(f"== {variant}")
    print(report.to_table())
    worst = max(verify_counts(model, FRAMES).values())
    print(f"analytic vs instrumented: max discrepancy {worst}\n")

# The baseline with a reduction layer spends a large slice of its budget on
# that single linear map; the nested models have no such layer at all.
dr = profile(build_model(canonical_config("res2net_dr")), FRAMES)
print(f"res2net_dr reduction layer: {dr.dr_params_share:.1%} of params, "
      f"{dr.dr_macs_share:.1%} of MACs")
