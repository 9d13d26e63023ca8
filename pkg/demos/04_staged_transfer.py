# Two-hop transfer on a toy backbone
# ==================================
#
# A related, well-sampled "intermediate" domain is learned first (new input
# layer and head, then everything), the head is replaced and the model is
# fine-tuned on a tiny target set. The baseline spends the same number of
# epochs on the target set alone.

from itertools import groupby

from modelaug.synthetic import image_domains
from modelaug.training import (TARGET_AUG, ToyBackbone, desk_scale_plan, direct_plan, paper_default_plan,
                               parameter_distance, run_plan)

print("published schedule:")
for s in paper_default_plan().stages:
    print(f"  {s.name:24s} {s.role:12s} epochs={s.epochs} rates={s.group_rates()}")

inter, target, held_out = image_domains(seed=0)
print(f"\nintermediate: {len(inter.labels)} images, target: {len(target.labels)}, held out: {len(held_out.labels)}")

source = ToyBackbone(16, 2, seed=0)
plan = desk_scale_plan()
staged, trace = run_plan(source, plan, inter, target, seed=0)
direct, _ = run_plan(source, direct_plan(plan.total_epochs, 1e-3, TARGET_AUG), inter, target, seed=0)

for stage, rows in groupby(trace, key=lambda r: r.stage):
    rows = list(rows)
    print(f"  {stage:24s} clean loss {rows[0].clean_loss:.3f} -> {rows[-1].clean_loss:.3f}")

for name, model in (("staged", staged), ("direct", direct)):
    probs = model.predict_proba(held_out.images)
    acc = (probs.argmax(axis=1) == held_out.labels).mean()
    print(f"{name}: held-out loss {model.loss(held_out.images, held_out.labels):.3f}, accuracy {acc:.2f}")

# how far each run moved the shared layers away from the starting point
for name, model in (("staged", staged), ("direct", direct)):
    print(f"{name}: distance from source (input+trunk) {parameter_distance(source, model, ('new_input', 'trunk')):.3f}")
