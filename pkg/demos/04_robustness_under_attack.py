"""How much do predictions degrade when someone nudges the latent
representation against us?  Sweep the attack radius and compare a
normally trained model with an adversarially trained one."""
import numpy as np

from advalstm.evaluation import accuracy, mcc, rpd
from advalstm.model import ModelDims, classify
from advalstm.synthetic import make_regime_examples
from advalstm.training import TrainConfig, attacked_confidences, train

x, y = make_regime_examples(3000, lag=5, seed=4, signal=0.5, noise=1.0)
x_tr, y_tr = x[:2000], y[:2000]
x_te, y_te = x[2000:], y[2000:]
dims = ModelDims(feat_dim=11, map_size=8, hidden_size=8, att_size=8)

models = {}
for mode, beta in (("normal", 0.0), ("adversarial", 1.0)):
    config = TrainConfig(
        mode=mode, l2_coef=0.01, adv_weight=beta, adv_scale=0.5,
        learning_rate=0.01, batch_size=512, epochs=60, seed=0, patience=0,
    )
    models[mode] = train(x_tr, y_tr, x[:0], y[:0], dims, config).params

# the attack re-derives the worst-case perturbation against each model,
# so this is a fair white-box comparison at every radius
print(f"{'radius':>8} | {'normal acc':>10} {'rpd':>7} | {'adversarial acc':>15} {'rpd':>7}")
for eps in (0.0, 0.1, 0.25, 0.5, 1.0):
    row = []
    for mode in ("normal", "adversarial"):
        clean, attacked = attacked_confidences(x_te, y_te, models[mode], eps)
        acc_clean = accuracy(y_te, classify(clean))
        acc_att = accuracy(y_te, classify(attacked))
        drop = rpd(acc_clean, acc_att)
        row.append((acc_att, 0.0 if drop is None else drop))
    print(f"{eps:>8} | {row[0][0]:>10.1f} {row[0][1]:>+7.3f} | {row[1][0]:>15.1f} {row[1][1]:>+7.3f}")

# same story in MCC terms at the training radius
for mode in ("normal", "adversarial"):
    clean, attacked = attacked_confidences(x_te, y_te, models[mode], 0.5)
    m_clean, m_att = mcc(y_te, classify(clean)), mcc(y_te, classify(attacked))
    print(f"{mode:>12}: clean mcc {m_clean:.3f} attacked {m_att:.3f} rpd {rpd(m_clean, m_att):+.3f}")
