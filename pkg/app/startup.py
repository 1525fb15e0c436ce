import logging

LOG_FORMAT = "%(asctime)s %(name)s %(levelname)s %(message)s"


def startup(verbose: bool = False) -> None:
    # called once by the CLI before any command runs
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO, format=LOG_FORMAT, force=True)
    # matplotlib's font manager is chatty at DEBUG
    logging.getLogger("matplotlib").setLevel(logging.WARNING)
