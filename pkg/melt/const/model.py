import enum


class QuantScheme(enum.StrEnum):
    GROUP_QUANT = "group-quant"
    GPTQ = "gptq"
    AWQ = "awq"
    K_QUANTS = "k-quants"
    NONE = "none"


class ModelFormat(enum.StrEnum):
    GGUF = "gguf"
    TVM_LIB = "tvm-lib"
    RAW = "raw"


class Backend(enum.StrEnum):
    MLC_LLM = "mlc-llm"
    LLAMA_CPP = "llama-cpp"
    LLMFARM = "llmfarm"
    SIM = "sim"


class ExperimentMode(enum.StrEnum):
    MACRO = enum.auto()
    MICRO = enum.auto()


ALLOWED_BITWIDTHS: frozenset[int] = frozenset({3, 4, 8, 16})

# Micro experiments pin both prefill and generation to this many tokens, with EOS disabled.
MICRO_PREFILL_TOKENS = 256
MICRO_GEN_TOKENS = 256
