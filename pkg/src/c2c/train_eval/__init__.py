from .metrics import bce_loss, roc_auc
from .optim import AdamState, TrainConfig, adam_step, lr_schedule
