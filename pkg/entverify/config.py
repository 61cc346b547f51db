import os
from dotenv import load_dotenv

BASE_DIR = os.path.abspath(os.path.dirname(os.path.dirname(__file__)))
load_dotenv(os.path.join(BASE_DIR, ".env"), override=True)


class Config:
    # Operator-norm tolerance for constructions and identity checks
    TOL = float(os.getenv("ENTVERIFY_TOL", "1e-9"))
    # Looser tolerance for verdicts over long composites
    VERDICT_TOL = float(os.getenv("ENTVERIFY_VERDICT_TOL", "1e-8"))
    # Relative cutoff for numerical rank (eigen/singular values)
    RANK_TOL = float(os.getenv("ENTVERIFY_RANK_TOL", "1e-10"))
    # Relative negativity tolerated in Choi blocks and densities
    PSD_TOL = float(os.getenv("ENTVERIFY_PSD_TOL", "1e-9"))

    SEED = int(os.getenv("ENTVERIFY_SEED", "0"))

    LOG_LEVEL = os.getenv("LOG_LEVEL", "WARNING")

    SCHEMA_VERSION = "1"
