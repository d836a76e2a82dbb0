import argparse
import os
import sys

# Add the parent directory to the path so we can import our modules
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from config.settings import DEFAULT_ARRIVAL_RATE, DEFAULT_MARK_RATE, DEFAULT_MARK_SHAPE, DEFAULT_SEED
from models.domain_models import DistributionRole, DistributionSpec, ModelParams
from repositories.transaction_repository import CsvTransactionRepository
from services.simulation_service import PolicySimulationService


def generate(output: str, days: float, seed: int, arrival_rate: float = DEFAULT_ARRIVAL_RATE,
             mark_shape: float = DEFAULT_MARK_SHAPE, mark_rate: float = DEFAULT_MARK_RATE,
             decline_rate: float = 0.05, split_rate: float = 0.05) -> int:
    """Write a synthetic single-customer transaction CSV and return its row count."""
    params = ModelParams(
        gamma_interchange=0.0054,
        nu_funding=0.0007,
        period_days=days,
        mark_dist=DistributionSpec.gamma(mark_shape, mark_rate),
        arrival_dist=DistributionSpec.exponential(arrival_rate, DistributionRole.INTER_ARRIVAL),
    )
    records = PolicySimulationService().synthesize_transactions(
        params, days, seed, decline_rate=decline_rate, split_rate=split_rate)
    CsvTransactionRepository().save_records(output, records)
    return len(records)


def main():
    parser = argparse.ArgumentParser(description="Generate a synthetic transaction CSV")
    parser.add_argument("--output", default=os.path.join("data", "synthetic_transactions.csv"))
    parser.add_argument("--days", type=float, default=475.0)
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED)
    parser.add_argument("--lambda", dest="arrival_rate", type=float, default=DEFAULT_ARRIVAL_RATE)
    parser.add_argument("--mark-shape", type=float, default=DEFAULT_MARK_SHAPE)
    parser.add_argument("--mark-rate", type=float, default=DEFAULT_MARK_RATE)
    parser.add_argument("--decline-rate", type=float, default=0.05)
    parser.add_argument("--split-rate", type=float, default=0.05)
    args = parser.parse_args()

    count = generate(args.output, args.days, args.seed, args.arrival_rate, args.mark_shape,
                     args.mark_rate, args.decline_rate, args.split_rate)
    print(f"Wrote {count} transactions to {args.output}")


if __name__ == "__main__":
    main()
