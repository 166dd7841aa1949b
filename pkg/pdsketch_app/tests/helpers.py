"""Small domains shared by the test modules."""

import numpy as np

from pdsketch_app.domain_model import Universe, bind_slot
from pdsketch_app.neural_slots import FunctionSlot
from pdsketch_app.pds_validation import load_domain
from pdsketch_app.state_eval import make_state

LIGHTS = """
(define (domain lights)
  (:types
    item - object
    lvl - vector[float32, 1]
  )
  (:predicates
    (on ?o - item)
    (broken ?o - item)
    (level [return_type=lvl] ?o - item)
  )
  (:derived (bright ?o - item) (??f (level ?o)))
  (:action switch
   :parameters (?o - item)
   :precondition (not (broken ?o))
   :effect (and (on ?o) (level::assign ?o (??g (level ?o)))))
  (:action fail
   :parameters (?o - item)
   :precondition (and )
   :effect (when (broken ?o) (not (on ?o))))
  (:action repair
   :parameters (?o - item)
   :precondition (and )
   :effect (when (broken ?o) (on ?o)))
  (:action dim
   :parameters (?o - item)
   :precondition (and )
   :effect (when (broken ?o) (level::assign ?o (??h))))
  (:action both [distinct=true]
   :parameters (?o ?p - item)
   :precondition (and )
   :effect (and (on ?o) (on ?p)))
  (:action twice
   :parameters (?o ?p - item)
   :precondition (and )
   :effect (and (on ?o) (on ?p)))
)
"""


def lights_domain(bind=True, source=LIGHTS):
    domain = load_domain(source)
    if bind:
        bind_slot(domain, "derived::bright::f",
                  FunctionSlot(lambda v: float(v[0] > 0.5), (1,), 1, is_bool=True))
        bind_slot(domain, "action::switch::g", FunctionSlot(lambda v: v + 1.0, (1,), 1))
        bind_slot(domain, "action::dim::h", FunctionSlot(lambda: np.array([0.0]), (), 1))
    return domain


def lights_state(domain, on=(0.0, 1.0), broken=(0.0, 0.0), level=(0.2, 0.9), names=("a", "b")):
    universe = Universe([(n, "item") for n in names])
    raw = {
        "on": {(n,): v for n, v in zip(names, on)},
        "broken": {(n,): v for n, v in zip(names, broken)},
        "level": {(n,): [v] for n, v in zip(names, level)},
    }
    return make_state(domain, universe, raw)
