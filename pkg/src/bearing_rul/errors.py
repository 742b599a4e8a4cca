class NumericalError(RuntimeError):
    """Training produced a non-finite value.

    ``diagnostics`` carries where it happened (epoch, batch, gradient
    norms, layer name) and ``last_good_state`` the most recent finite
    parameters, when the caller kept one.
    """

    def __init__(self, message, diagnostics=None, last_good_state=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
        self.last_good_state = last_good_state
