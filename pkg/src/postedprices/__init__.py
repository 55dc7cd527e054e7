"""Posted-price mechanisms for subadditive combinatorial auctions."""

from .errors import CapabilityError, InputError, NumericError, PostedPriceError
from .game import (CompleteInfoPrices, GameResult, antagonist_value, complete_info_prices,
                   game_value, payoff, protagonist_value, q_schedule, schedule_bound,
                   verify_key_lemma)
from .generators import FAMILIES, gen_instance, independent_items_distribution
from .io import (instance_from_dict, instance_to_dict, load_instance, load_prices,
                 save_instance, valuation_from_dict)
from .itemset import ItemSet, SetDistribution
from .lowerbound import (GapFunction, StackedValuation, adversary_mu, best_response_value,
                         build_lower_bound,
                         critical_level, lemma11_report, proof_bound)
from .mechsim import (ExpectedOutcome, MechanismRun, competitive_ratio, expected_outcome,
                      expected_welfare, run_posted_price, verify_utility_bound)
from .prices import PriceVector
from .pricing import (ExactPrices, LpCache, SamplingPlan, compute_prices, compute_prices_exact,
                      price_inequality_lhs, sample_counts)
from .revenue import (SurplusFunction, core_instance, entry_fee_bound_check, run_aspe,
                      run_rspm, tau, tradeoff_constant)
from .valuations import (XOS, Additive, Instance, ScaledSum, Table, UnitDemand, Valuation,
                         ValuationDistribution, demand, is_monotone, is_subadditive, restrict)
from .welfare_lp import (ConfigLpSolution, MarginalCaps, f_value, opt_welfare,
                         solve_bayes_config_lp, solve_config_lp)

__version__ = "0.1.0"
