"""
Configuration file for the Transference Automatic Post-Editing System
"""

import os
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()

# Project paths
BASE_DIR = Path(__file__).resolve().parent

# Default directory for flat key=value run configs
CONFIG_DIR = Path(os.getenv("APE_CONFIG_DIR", str(BASE_DIR / "configs")))

# Special tokens (fixed leading ids, before any BPE symbol)
BOS_TOKEN = "<s>"
EOS_TOKEN = "</s>"
PAD_TOKEN = "<pad>"
SEP_TOKEN = "<sep>"
UNK_TOKEN = "<unk>"
SPECIAL_TOKENS = [BOS_TOKEN, EOS_TOKEN, PAD_TOKEN, SEP_TOKEN, UNK_TOKEN]
BOS_ID = 0
EOS_ID = 1
PAD_ID = 2
SEP_ID = 3
UNK_ID = 4

# BPE Configuration
END_OF_WORD = "</w>"
BPE_NUM_MERGES = 500  # desk scale

# Model Configuration (desk-scale defaults)
ARCHITECTURES = ["transference", "mt_to_pe", "concat_src_mt", "src_to_pe"]
ARCHITECTURE = "transference"
N_SRC = 2
N_MT = 2
N_PE = 2
D_MODEL = 64
NUM_HEADS = 4
D_FF = 256
DROPOUT = 0.1
MAX_LEN = 256  # subwords per side
SHARE_MT_PE_EMBEDDINGS = True
DTYPE = "float64"

LAYER_NORM_EPS = 1e-6
MASK_VALUE = -1e9  # blocked attention logits
POSITION_RATE = 10000.0

# Training Configuration
WARMUP_STEPS = 8000
TOKEN_BUDGET = 2000        # target-side tokens per batch
MAX_STEPS = 2000
MAX_EPOCHS = 1000
EVAL_INTERVAL = 200
DEV_DECODE_LIMIT = 200     # dev sentences decoded for dev BLEU
LABEL_SMOOTHING = 0.1
ADAM_BETAS = (0.9, 0.98)
ADAM_EPS = 1e-9
LR_SCALE = 1.0
ACCUMULATION = 1
SHUFFLE_CHUNK = 64         # examples per length-sorted chunk
SEED = 1234

# Decoding Configuration
BEAM_SIZE = 4
LENGTH_PENALTY = 0.6
MAX_LEN_OFFSET = 50        # max output length = len(mt) + offset
DECODE_WORKERS = 1

# Evaluation Configuration
BLEU_MAX_N = 4
BLEU_SMOOTHING = "auto"
TER_MAX_SHIFT_SIZE = 10
TER_MAX_SHIFT_DISTANCE = 50
EDIT_OPERATIONS = ["In", "De", "Su", "Sh"]

# Synthetic Data Configuration
SYNTH_LEXICON_SIZE = 60
SYNTH_CLUSTER_SIZE = 3
SYNTH_MIN_WORDS = 3
SYNTH_MAX_WORDS = 8

# Ablation Configuration
ABLATION_LAYER_TRIPLES = [(2, 2, 2), (2, 2, 1), (2, 1, 2)]

# Logging Configuration
LOG_LEVEL = os.getenv("APE_LOG_LEVEL", "INFO")
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
