import numpy as np

from clfa.common.errors import argument_error, data_error
from clfa.data.schema import ImageDataset, LabeledSample, Triple
from clfa.transforms import TransformBank


def _draw_positive(rng: np.random.Generator, members: np.ndarray, anchor: int) -> int:
    # DOC: uniform over the other members of the class, the anchor itself for singleton classes
    if len(members) < 2:
        return anchor
    others = members[members != anchor]
    return int(others[rng.integers(len(others))])


def sample_triple_batch(
    ds: ImageDataset,
    triples_per_class: int,
    rng: np.random.Generator,
    tb: TransformBank,
    dataset_tag: str,
    use_transforms: bool = True
) -> list[Triple]:
    """
    Draw a class-balanced mini-batch of triples.

    For every class, triples_per_class anchors are drawn (without replacement when the class is
    large enough), each with a same-class positive and a generated image x_g = T(x_a) where T is a
    chain of tb.composition_depth freshly sampled strategies. A child seed for the noise strategies
    is drawn per triple and recorded, so every x_g can be rebuilt from the triple's provenance.

    Args:
        ds: Source dataset.
        triples_per_class: Triples per class, >= 1.
        rng: Exclusively owned random source; the batch is a pure function of its state.
        tb: Transform bank.
        dataset_tag: Selects the semantics-safe strategy subset.
        use_transforms: When False, x_g is a copy of x_a and no strategy is recorded.

    Returns:
        list[Triple]: triples_per_class * num_classes triples ordered by class.
    """
    if triples_per_class < 1:
        raise argument_error(f"triples_per_class must be >= 1, got {triples_per_class}.")
    empty = [ds.class_names[k] for k, members in enumerate(ds.class_indices) if len(members) == 0]
    if empty:
        raise data_error(f"Classes without samples: {empty}.", classes=empty)

    triples = []
    for label, members in enumerate(ds.class_indices):
        anchors = rng.choice(members, size=triples_per_class, replace=len(members) < triples_per_class)
        for anchor_index in anchors:
            anchor = ds[int(anchor_index)]
            positive = ds[_draw_positive(rng, members, int(anchor_index))]
            chain = tb.sample_chain(rng, dataset_tag) if use_transforms else []
            noise_seed = int(rng.integers(2**31 - 1))
            generated_image = tb.apply(anchor.image, chain, rng=np.random.default_rng(noise_seed))
            triples.append(Triple(
                anchor = anchor,
                positive = positive,
                generated = LabeledSample(image=generated_image, label=label, sample_id=f"{anchor.sample_id}#g"),
                label = label,
                transforms = tuple((spec.name, magnitude) for spec, magnitude in chain),
                noise_seed = noise_seed
            ))
    return triples


def replay_generated(triple: Triple, tb: TransformBank) -> np.ndarray:
    """Rebuild x_g of a triple from its recorded strategies and noise seed."""
    chain = [(tb.spec(name), magnitude) for name, magnitude in triple.transforms]
    return tb.apply(triple.anchor.image, chain, rng=np.random.default_rng(triple.noise_seed))
