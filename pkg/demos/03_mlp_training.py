"""Train the feed-forward network and watch early stopping work.

Uses a reduced architecture so the demo finishes in seconds; the full
128/64/32 configuration is the MlpConfig default. Prints the per-epoch
history, where training halts once validation AUC stops improving, and the
held-out evaluation at the stored threshold.

Run:  python demos/03_mlp_training.py
"""

from vbackit import synth
from vbackit.mlp import MlpConfig
from vbackit.pipeline import TrainSettings, train_family

print("1. Training a 32/16/8 network with class weights on 30,000 rows...")
cohort = synth.generate_cohort(synth.default_config(n=30_000, seed=23))
labeled = cohort.to_labeled_cohort()
config = MlpConfig(
    hidden_sizes=(32, 16, 8),
    dropout_rates=(0.3, 0.2, 0.0),
    learning_rate=1e-3,
    batch_size=256,
    max_epochs=30,
    patience=5,
)
result = train_family(labeled, TrainSettings(family="mlp", seed=3, mlp=config))

history = result.history
print("\n   epoch  train_loss  val_loss  train_auc  val_auc")
for i in range(history.n_epochs()):
    marker = "  <- best" if i + 1 == history.best_epoch else ""
    print(f"   {i+1:>5d}  {history.train_loss[i]:>10.4f}  {history.val_loss[i]:>8.4f}"
          f"  {history.train_auc[i]:>9.4f}  {history.val_auc[i]:>7.4f}{marker}")
print(f"\n   stopped after epoch {history.n_epochs()} "
      f"(patience 5), restored weights from epoch {history.best_epoch}")

report = result.report
print(f"\n2. Held-out test set: AUROC {report.roc_auc:.4f}  PR-AUC {report.pr_auc:.4f}")
cm = report.confusion
print(f"   confusion at threshold {report.threshold:.2f}: "
      f"tp={cm.tp} fp={cm.fp} tn={cm.tn} fn={cm.fn}")
print(f"   VBAC (1):   precision {report.per_class[1].precision:.2f}"
      f"  recall {report.per_class[1].recall:.2f}")
print(f"   repeat (0): precision {report.per_class[0].precision:.2f}"
      f"  recall {report.per_class[0].recall:.2f}")
print(f"   Bayes ceiling: {synth.bayes_auc(cohort):.4f}")
