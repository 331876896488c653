"""Active-sensing robot-to-human handover.

Submodules:

* :mod:`active_handover.contact_model` - Bayesian piecewise-linear contact state
* :mod:`active_handover.firmness` - c-feasibility of target forces
* :mod:`active_handover.planner` - information-gain probing motions
* :mod:`active_handover.observer` - momentum-residual wrench observer
* :mod:`active_handover.sim` - scripted receivers and closed-loop episodes
"""
__version__ = "0.1.0"
