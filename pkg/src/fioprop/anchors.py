"""Registry of estimate-check identifiers.

Every row an estimate suite emits must carry one of these ids; the report
writer enforces membership so a silently renamed or dropped check fails
loudly instead of drifting out of the results schema.
"""

SUITE_CHECKS = {
    "prop21": (
        "flow.q-displacement",
        "flow.p-deviation",
        "flow.dq-dx-backward",
        "flow.dq-dx-forward",
        "flow.dp-dx",
        "flow.dq-dxi-backward",
        "flow.dp-dxi-backward",
        "flow.dq-dxi-forward",
        "flow.dp-dxi-forward",
        "flow.q-second-derivs",
        "flow.p-second-derivs",
        "flow.straightline-defect",
        "flow.straightline-defect-dxi",
    ),
    "prop22": (
        "inverse.eta-deviation",
        "inverse.eta-deviation-fit",
        "inverse.y-straightline",
        "inverse.dy-dx",
        "inverse.dy-dxi",
        "inverse.deta-dx",
        "inverse.deta-dx-fit",
        "inverse.deta-dxi",
        "inverse.eta-second-derivs",
        "inverse.y-second-derivs",
        "inverse.roundtrip",
        "inverse.bijectivity",
    ),
    "prop23": (
        "phase.grad-x-identity",
        "phase.grad-xi-identity",
        "phase.hj-residual-s",
        "phase.hj-residual-t",
    ),
    "thm31": (
        "defect.decay-slope",
        "defect.norm-bounded",
        "defect.fixed-s-envelope",
        "parametrix.norm-bounded",
    ),
    "main": (
        "amplitude.sup-deviation",
        "amplitude.sup-deviation-fit",
        "amplitude.seminorm-1",
        "amplitude.seminorm-2",
        "amplitude.route-agreement",
        "volterra.picard-ratio",
        "propagator.reference-agreement",
        "propagator.reference-unitarity",
    ),
}

ALL_CHECK_IDS = frozenset(cid for ids in SUITE_CHECKS.values() for cid in ids)
