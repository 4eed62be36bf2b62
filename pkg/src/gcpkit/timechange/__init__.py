"""Time-changed generalized counting processes."""

from . import bell

from .core import (FirstPassageLaw, InverseStable, Multistable, Subordinated, TimeChangeSpec,
                   subordinator_at)
from .gfcp import (ResidualReport, gfcp_governing_check, gfcp_pgf, gfcp_pmf, gfcp_sample,
                   ngfcp_governing_residual, ngfcp_pmf)
from .moments import (LrdEstimate, MfaMoments, inverse_stable_cov, inverse_stable_joint,
                      inverse_stable_mean, inverse_stable_variance, lrd_constant, lrd_estimate,
                      mfa_moments, mfa_sample_joint)
from .stable import (gsfcp_jump_rates, gsfcp_min_uniform_mc, gsfcp_pgf, gsfcp_pmf, gsfcp_sample,
                     gsmcp_bernstein, gsmcp_bernstein_series, gsmcp_first_passage,
                     gsmcp_first_passage_mc, gsmcp_levy_weights, gsmcp_state_probs,
                     gstfcp_min_uniform_mc, gstfcp_pgf, gstfcp_pmf, gstfcp_sample)
from .tcgcp import (tcgcp_first_passage, tcgcp_first_passage_law, tcgcp_first_passage_mc,
                    tcgcp_hitting_law, tcgcp_hitting_prob, tcgcp_jump_rates, tcgcp_pgf, tcgcp_pmf,
                    tcgcp_passage_mc, tcgcp_rate_sum, tcgcp_rate_table, tcgcp_rate_tails,
                    tcgcp_sample_counts, tcgcp_survival, tcgfcp_sample)

__all__ = [name for name, obj in list(globals().items())
           if not name.startswith("_") and not isinstance(obj, type(bell))]
