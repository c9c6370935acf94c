"""Point class codes shared by the simulator, classifier and file IO."""

NONE = 0
INSIDE = 1
GLASS = 2
REFLECTION = 3
OUTSIDE = 4
UNRESOLVED = 5

CODE_TO_CHAR = {NONE: "-", INSIDE: "I", GLASS: "G", REFLECTION: "R",
                OUTSIDE: "O", UNRESOLVED: "U"}
CHAR_TO_CODE = {v: k for k, v in CODE_TO_CHAR.items()}
