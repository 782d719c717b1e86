//! Process memory accounting via the kernel's status file.
//!
//! Benchmarks subtract a baseline reading taken before the measured work
//! from the peak resident set afterwards, so only the allocation attributable
//! to the work itself is reported. On platforms without this accounting the
//! probes return `None` and callers report the measurement as unavailable.

#[cfg(target_os = "linux")]
fn read_status_kib(key: &str) -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    for line in status.lines() {
        if let Some(rest) = line.strip_prefix(key) {
            let rest = rest.trim_start_matches(':').trim();
            let kib: u64 = rest.split_whitespace().next()?.parse().ok()?;
            return Some(kib);
        }
    }
    None
}

/// Current resident set size in bytes.
#[cfg(target_os = "linux")]
pub fn current_rss_bytes() -> Option<u64> {
    read_status_kib("VmRSS").map(|kib| kib * 1024)
}

/// Lifetime peak resident set size in bytes.
#[cfg(target_os = "linux")]
pub fn peak_rss_bytes() -> Option<u64> {
    read_status_kib("VmHWM").map(|kib| kib * 1024)
}

#[cfg(not(target_os = "linux"))]
pub fn current_rss_bytes() -> Option<u64> {
    None
}

#[cfg(not(target_os = "linux"))]
pub fn peak_rss_bytes() -> Option<u64> {
    None
}
