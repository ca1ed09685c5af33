# check if required keys are present and validate config section values

VARIANTS = ("E1D1", "E2D1", "E4D1")
DSM_WEIGHTINGS = ("none", "std2")


def require_keys(obj, keys):
    missing = [k for k in keys if k not in obj]
    return missing


def is_snake_id(s):
    if not isinstance(s, str) or not s:
        return False
    return all(c.islower() or c.isdigit() or c == "_" for c in s)


def _positive(section, keys):
    for k in keys:
        v = section.get(k)
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            return f"{k} must be number"
        if v <= 0:
            return f"{k} must be positive"
    return None


def validate_pipeline(payload):
    miss = require_keys(payload, ["variant"])
    if miss:
        return f"missing fields: {', '.join(miss)}"
    if payload["variant"] not in VARIANTS:
        return f"variant must be one of {', '.join(VARIANTS)}"
    if not isinstance(payload.get("use_ndpca", True), bool):
        return "use_ndpca must be true or false"
    return None


def validate_stft(payload):
    err = _positive(payload, ["fft_size", "hop", "window", "sample_rate"])
    if err:
        return err
    if not payload["hop"] <= payload["window"] <= payload["fft_size"]:
        return "need hop <= window <= fft_size"
    return None


def validate_channel(payload):
    err = _positive(payload, ["eta", "period_T", "source_var", "quant_dist"])
    if err:
        return err
    if payload["quant_dist"] >= payload["source_var"]:
        return "quant_dist must be smaller than source_var (rate bound non-positive)"
    return None


def validate_sde(payload):
    err = _positive(payload, ["theta", "sigma_min", "sigma_max", "n_steps"])
    if err:
        return err
    if payload["sigma_min"] >= payload["sigma_max"]:
        return "sigma_min must be smaller than sigma_max"
    return None


def validate_losses(payload):
    for k, v in payload.items():
        if not k.startswith("w_"):
            return f"unknown field: {k}"
        if not isinstance(v, (int, float)):
            return f"{k} must be number"
        if v < 0:
            return f"{k} must be >= 0"
    return None


def validate_train(payload):
    err = _positive(payload, ["epochs", "batch_size", "lr"])
    if err:
        return err
    if int(payload["epochs"]) != payload["epochs"]:
        return "epochs must be an integer"
    if payload.get("dsm_weighting", "std2") not in DSM_WEIGHTINGS:
        return f"dsm_weighting must be one of {', '.join(DSM_WEIGHTINGS)}"
    return None


def validate_budgets(budgets):
    if not isinstance(budgets, list) or not budgets:
        return "budgets must be a non-empty list"
    if any(not isinstance(b, int) or b < 0 for b in budgets):
        return "budgets must be non-negative integers"
    if budgets != sorted(budgets):
        return "budgets must be sorted ascending"
    return None


def validate_experiment(cfg):
    checks = [
        ("pipeline", validate_pipeline),
        ("stft", validate_stft),
        ("channel", validate_channel),
        ("sde", validate_sde),
        ("losses", validate_losses),
        ("train", validate_train),
    ]
    for section, check in checks:
        err = check(cfg.get(section, {}))
        if err:
            return f"{section}: {err}"
    err = validate_budgets(cfg.get("budgets"))
    if err:
        return f"budgets: {err}"
    return None


def validate_link(payload):
    miss = require_keys(payload, ["link_id", "checkpoint"])
    if miss:
        return f"missing fields: {', '.join(miss)}"
    if not is_snake_id(payload["link_id"]):
        return "link_id must be snake_case (e.g., room1_uplink)"
    period = payload.get("period_sec", 1)
    if not isinstance(period, (int, float)) or period <= 0:
        return "period_sec must be a positive number"
    if "channel" in payload:
        err = validate_channel(payload["channel"])
        if err:
            return f"channel: {err}"
    return None


def validate_segment(payload):
    miss = require_keys(payload, ["session", "speaker", "start_s", "end_s", "clean_wav", "mic_wavs"])
    if miss:
        return f"missing fields: {', '.join(miss)}"
    if not isinstance(payload["mic_wavs"], list) or not payload["mic_wavs"]:
        return "mic_wavs must be a non-empty list"
    try:
        start, end = float(payload["start_s"]), float(payload["end_s"])
    except (TypeError, ValueError):
        return "start_s and end_s must be numbers"
    if start < 0 or end <= start:
        return f"end_s must exceed start_s >= 0 (got {start}, {end})"
    return None
