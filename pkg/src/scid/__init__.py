"""Workbench for structure-hypothesis-driven verification and synthesis.

Three instantiations share one deductive core (a bit-vector SAT layer):

* ``scid.timing``  -- measurement-based timing analysis over basis paths,
* ``scid.synth``   -- oracle-guided synthesis of loop-free bit-vector programs,
* ``scid.hybrid``  -- hyperbox switching-logic synthesis for multi-modal ODEs.

``scid.framework`` holds the shared vocabulary: structure hypotheses,
validity checking by enumeration, and audit records.
"""

__version__ = "0.1.0"
