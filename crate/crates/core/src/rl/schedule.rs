/// Linear decay from `initial` at step 0 to zero at `max_steps`.
pub fn schedule(initial: f64, step: u64, max_steps: u64) -> f64 {
    if max_steps == 0 {
        return 0.0;
    }
    initial * (1.0 - step as f64 / max_steps as f64).max(0.0)
}
