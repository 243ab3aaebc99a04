from .dropout import (  # noqa
    DropoutDraw,
    SampleStreams,
    apply_dropout,
    draw_dropout,
    dropout_rng,
    log_rates,
    sample_streams,
)
