from .checkpoint import load_checkpoint, save_checkpoint
from .layers import attentive_stat_pool, se_res2_block
from .network import (
    AlphaFusion,
    C2CModel,
    ClassifierConfig,
    EtEncoderConfig,
    classifier_forward,
    et_encoder_forward,
    fuse_alpha,
)
from .tensor import Tensor, conv1d, parameter
