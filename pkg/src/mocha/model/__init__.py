from .dmad import (
    DmadConfig,
    DmadOutput,
    conv_block_stack,
    ddb_heads,
    dmad_forward,
    init_conv_block_stack,
    init_dmad,
    init_mcb,
    init_mdb,
    init_ddb,
    mcb_forward,
    mdb_forward,
)
from .network import FRAMES, ModelConfig, init_model, mocha_forward, section_names
from .stad import (
    StadConfig,
    WindowGrid,
    arb,
    fca,
    init_arb,
    init_fca,
    init_mhwa,
    init_prb,
    init_rhatb,
    init_sfb,
    init_stad,
    init_wfb,
    mhwa,
    prb,
    rhatb,
    sfb_forward,
    stad_forward,
    wfb,
    wfb_core,
    window_partition_3d,
    window_unpartition_3d,
)

__all__ = [
    "FRAMES",
    "DmadConfig",
    "DmadOutput",
    "ModelConfig",
    "StadConfig",
    "WindowGrid",
    "arb",
    "conv_block_stack",
    "ddb_heads",
    "dmad_forward",
    "fca",
    "init_arb",
    "init_conv_block_stack",
    "init_ddb",
    "init_dmad",
    "init_fca",
    "init_mcb",
    "init_mdb",
    "init_mhwa",
    "init_model",
    "init_prb",
    "init_rhatb",
    "init_sfb",
    "init_stad",
    "init_wfb",
    "mcb_forward",
    "mdb_forward",
    "mhwa",
    "mocha_forward",
    "prb",
    "rhatb",
    "sfb_forward",
    "section_names",
    "stad_forward",
    "wfb",
    "wfb_core",
    "window_partition_3d",
    "window_unpartition_3d",
]
