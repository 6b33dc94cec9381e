"""chaingen: event-chain constrained generation of vehicle decision logic.

Scenario text goes in; retrieval over a VSS catalog selects the signals the
generated code is allowed to touch; an event-chain model with per-step time
budgets is built, validated against order/time rules, and executed on a
simulated clock; finally the decision-logic source is generated and linted
against the signal/topic whitelist.
"""

__version__ = "0.1.0"
