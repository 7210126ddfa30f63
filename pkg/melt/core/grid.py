import itertools

import melt.const.error as error_const
import melt.schema.core as core_schema


def expand_grid(grid: core_schema.GridSpec) -> list[core_schema.GridPoint]:
    """
    Contexts and max generation lengths pair elementwise, that pairing is crossed with batch sizes.
    Pair index is the major order, batch index the minor one.
    """
    if len(grid.contexts) != len(grid.max_gen_lengths):
        error_const.CoreError.LENGTH_MISMATCH.build(
            contexts=len(grid.contexts), max_gen_lengths=len(grid.max_gen_lengths)
        ).raise_()

    pairs = zip(grid.contexts, grid.max_gen_lengths, strict=True)
    return [
        core_schema.GridPoint(context_size, max_gen_length, batch_size)
        for (context_size, max_gen_length), batch_size in itertools.product(pairs, grid.batch_sizes)
    ]
