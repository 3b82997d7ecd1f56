from dotenv import load_dotenv

# config reads the environment at import time
load_dotenv()

from rnweights.cli import main  # noqa: E402

main()
