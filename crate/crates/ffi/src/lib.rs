//! C ABI for the netlife simulator.
//!
//! Configurations and simulations are opaque handles created and freed by
//! this library. Every fallible call returns a [`NetlifeStatus`]; on failure
//! [`netlife_last_error`] describes the most recent error on the calling
//! thread. Panics never cross the boundary; they surface as
//! `NETLIFE_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use netlife::lifetime;
use netlife::metrics::{StepRecord, TrafficState};
use netlife::{run_simulation, ClassifierThresholds, Error, Network, RunSummary, SimConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetlifeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidConfig = 2,
    InvalidArgument = 3,
    InsufficientData = 4,
    NetworkDead = 5,
    Io = 6,
    Panic = 7,
}

/// Simulation parameters. Create with [`netlife_config_new`].
pub struct NetlifeConfig {
    inner: SimConfig,
}

/// A network advanced one step at a time. Create with [`netlife_sim_new`].
pub struct NetlifeSim {
    net: Network,
}

/// Observables after one step. Counts are for that step only.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NetlifeStepRecord {
    pub t: u64,
    /// Packets queued anywhere in the network.
    pub s: u64,
    /// Nodes whose queue exceeded capacity before delivery.
    pub n_c: u64,
    pub e_total: f64,
    pub e_max: f64,
    pub e_min: f64,
    pub generated: u64,
    pub forwarded: u64,
    pub arrived: u64,
}

impl From<StepRecord> for NetlifeStepRecord {
    fn from(r: StepRecord) -> Self {
        Self {
            t: r.t,
            s: r.s,
            n_c: r.n_c,
            e_total: r.e_total,
            e_max: r.e_max,
            e_min: r.e_min,
            generated: r.generated,
            forwarded: r.forwarded,
            arrived: r.arrived,
        }
    }
}

pub const NETLIFE_STATE_UNCLASSIFIED: i32 = -1;
pub const NETLIFE_STATE_NO: i32 = 0;
pub const NETLIFE_STATE_SLOW: i32 = 1;
pub const NETLIFE_STATE_FAST: i32 = 2;
pub const NETLIFE_STATE_ABSOLUTE: i32 = 3;

/// Result of a full run. A value is meaningful only when its `has_` flag is
/// set.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NetlifeSummary {
    pub seed: u64,
    pub died: bool,
    pub steps: u64,
    pub has_lifetime: bool,
    pub lifetime: u64,
    pub has_delta_s: bool,
    pub delta_s: f64,
    pub has_tau0: bool,
    pub tau0: f64,
    pub has_k: bool,
    pub k: f64,
    /// One of the `NETLIFE_STATE_` constants.
    pub state: i32,
    pub has_range_at_death: bool,
    pub range_at_death: f64,
    pub e_total_end: f64,
    pub generated: u64,
    pub arrived: u64,
    pub forwarded: u64,
    pub deliveries_per_step: f64,
    pub has_predicted_general: bool,
    pub predicted_general: f64,
    pub has_predicted_no_congestion: bool,
    pub predicted_no_congestion: f64,
    pub has_predicted_absolute: bool,
    pub predicted_absolute: f64,
}

fn split<T: Default>(v: Option<T>) -> (bool, T) {
    match v {
        Some(x) => (true, x),
        None => (false, T::default()),
    }
}

impl From<&RunSummary> for NetlifeSummary {
    fn from(s: &RunSummary) -> Self {
        let (has_lifetime, lifetime) = split(s.lifetime);
        let (has_delta_s, delta_s) = split(s.delta_s);
        let (has_tau0, tau0) = split(s.tau0);
        let (has_k, k) = split(s.k);
        let (has_range_at_death, range_at_death) = split(s.range_at_death);
        let (has_predicted_general, predicted_general) = split(s.predicted_general);
        let (has_predicted_no_congestion, predicted_no_congestion) = split(s.predicted_no_congestion);
        let (has_predicted_absolute, predicted_absolute) = split(s.predicted_absolute);
        let state = match s.state {
            None => NETLIFE_STATE_UNCLASSIFIED,
            Some(TrafficState::NoCongestion) => NETLIFE_STATE_NO,
            Some(TrafficState::SlowCongestion) => NETLIFE_STATE_SLOW,
            Some(TrafficState::FastCongestion) => NETLIFE_STATE_FAST,
            Some(TrafficState::AbsoluteCongestion) => NETLIFE_STATE_ABSOLUTE,
        };
        Self {
            seed: s.seed,
            died: s.died,
            steps: s.steps,
            has_lifetime,
            lifetime,
            has_delta_s,
            delta_s,
            has_tau0,
            tau0,
            has_k,
            k,
            state,
            has_range_at_death,
            range_at_death,
            e_total_end: s.e_total_end,
            generated: s.generated,
            arrived: s.arrived,
            forwarded: s.forwarded,
            deliveries_per_step: s.deliveries_per_step,
            has_predicted_general,
            predicted_general,
            has_predicted_no_congestion,
            predicted_no_congestion,
            has_predicted_absolute,
            predicted_absolute,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> NetlifeStatus {
    match err {
        Error::Config { .. } => NetlifeStatus::InvalidConfig,
        Error::InsufficientData(_) => NetlifeStatus::InsufficientData,
        Error::NetworkDead(_) => NetlifeStatus::NetworkDead,
        Error::Io { .. } => NetlifeStatus::Io,
        _ => NetlifeStatus::InvalidArgument,
    }
}

fn fail(status: NetlifeStatus, msg: &str) -> NetlifeStatus {
    set_last_error(msg);
    status
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), NetlifeStatus>) -> NetlifeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            NetlifeStatus::Ok
        }
        Ok(Err(status)) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(NetlifeStatus::Panic, &format!("panic: {msg}"))
        }
    }
}

fn lift<T>(r: netlife::Result<T>) -> Result<T, NetlifeStatus> {
    r.map_err(|e| fail(status_of(&e), &e.to_string()))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, NetlifeStatus> {
    p.as_ref()
        .ok_or_else(|| fail(NetlifeStatus::NullPointer, &format!("`{what}` is null")))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, NetlifeStatus> {
    p.as_mut()
        .ok_or_else(|| fail(NetlifeStatus::NullPointer, &format!("`{what}` is null")))
}

unsafe fn utf8<'a>(p: *const c_char, what: &str) -> Result<&'a str, NetlifeStatus> {
    if p.is_null() {
        return Err(fail(NetlifeStatus::NullPointer, &format!("`{what}` is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(NetlifeStatus::InvalidArgument, &format!("`{what}` is not valid UTF-8")))
}

/// Message for the last failed call on this thread, or an empty string. The
/// pointer stays valid until the next call into this library on the same
/// thread.
#[no_mangle]
pub extern "C" fn netlife_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn netlife_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// A configuration holding the reference defaults. Free with
/// [`netlife_config_free`].
#[no_mangle]
pub extern "C" fn netlife_config_new() -> *mut NetlifeConfig {
    Box::into_raw(Box::new(NetlifeConfig {
        inner: SimConfig::default(),
    }))
}

/// # Safety
/// `config` must come from [`netlife_config_new`] and not be freed twice.
/// Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn netlife_config_free(config: *mut NetlifeConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Sets one parameter by its flag name (`nodes`, `area`, `radius`, `speed`,
/// `alpha`, `rate`, `capacity`, `energy`, `hop-cost`, `routing`, `seed`,
/// `max-steps`, `transient-cutoff`). Values are checked by
/// [`netlife_config_validate`], not here.
///
/// # Safety
/// `config` must be a live handle; `key` and `value` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn netlife_config_set(
    config: *mut NetlifeConfig,
    key: *const c_char,
    value: *const c_char,
) -> NetlifeStatus {
    guard(|| {
        let c = deref_mut(config, "config")?;
        let key = utf8(key, "key")?;
        let value = utf8(value, "value")?;
        if lift(c.inner.set(key, value))? {
            Ok(())
        } else {
            Err(fail(
                NetlifeStatus::InvalidArgument,
                &format!("unknown parameter `{key}`"),
            ))
        }
    })
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn netlife_config_validate(config: *const NetlifeConfig) -> NetlifeStatus {
    guard(|| lift(deref(config, "config")?.inner.validate()))
}

/// Starts a network from `config` (which is copied) and stores the handle in
/// `*out`. Free with [`netlife_sim_free`].
///
/// # Safety
/// `config` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn netlife_sim_new(config: *const NetlifeConfig, out: *mut *mut NetlifeSim) -> NetlifeStatus {
    guard(|| {
        let c = deref(config, "config")?;
        let out = deref_mut(out, "out")?;
        *out = ptr::null_mut();
        let net = lift(Network::new(&c.inner))?;
        *out = Box::into_raw(Box::new(NetlifeSim { net }));
        Ok(())
    })
}

/// # Safety
/// `sim` must come from [`netlife_sim_new`] and not be freed twice. Null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn netlife_sim_free(sim: *mut NetlifeSim) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Advances one step and writes its record to `*out` when `out` is not null.
/// Fails with `NETLIFE_STATUS_NETWORK_DEAD` once a node has died.
///
/// # Safety
/// `sim` must be a live handle; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn netlife_sim_step(sim: *mut NetlifeSim, out: *mut NetlifeStepRecord) -> NetlifeStatus {
    guard(|| {
        let s = deref_mut(sim, "sim")?;
        let rec = lift(s.net.step())?;
        if let Some(out) = out.as_mut() {
            *out = rec.into();
        }
        Ok(())
    })
}

/// The record of the initial state, before any step.
///
/// # Safety
/// `sim` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn netlife_sim_initial_record(
    sim: *const NetlifeSim,
    out: *mut NetlifeStepRecord,
) -> NetlifeStatus {
    guard(|| {
        let s = deref(sim, "sim")?;
        *deref_mut(out, "out")? = s.net.initial_record().into();
        Ok(())
    })
}

/// True once some node can no longer pay for a hop. False for null.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn netlife_sim_is_dead(sim: *const NetlifeSim) -> bool {
    sim.as_ref().is_some_and(|s| s.net.is_dead())
}

/// Steps taken so far. Zero for null.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn netlife_sim_now(sim: *const NetlifeSim) -> u64 {
    sim.as_ref().map_or(0, |s| s.net.now())
}

/// Runs `config` to death or `max-steps` with the default classifier and
/// writes the summary to `*out`.
///
/// # Safety
/// `config` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn netlife_run(config: *const NetlifeConfig, out: *mut NetlifeSummary) -> NetlifeStatus {
    guard(|| {
        let c = deref(config, "config")?;
        let out = deref_mut(out, "out")?;
        let (_, summary) = lift(run_simulation(&c.inner, &ClassifierThresholds::default()))?;
        *out = (&summary).into();
        Ok(())
    })
}

unsafe fn write_f64(out: *mut f64, r: netlife::Result<f64>) -> NetlifeStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        *out = lift(r)?;
        Ok(())
    })
}

/// `min(rho * tau0, C)`.
#[no_mangle]
pub extern "C" fn netlife_omega(gen_rate: f64, tau0: f64, capacity: f64) -> f64 {
    lifetime::omega(gen_rate, tau0, capacity)
}

/// Free-flow lifetime `(E0 - R/2) / (rho * tau0 * dE)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn netlife_predict_no_congestion(
    init_energy: f64,
    range_at_death: f64,
    gen_rate: f64,
    tau0: f64,
    hop_cost: f64,
    out: *mut f64,
) -> NetlifeStatus {
    write_f64(
        out,
        lifetime::predict_no_congestion(init_energy, range_at_death, gen_rate, tau0, hop_cost),
    )
}

/// Saturated lifetime `E0 / (C * dE)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn netlife_predict_absolute(
    init_energy: f64,
    capacity: f64,
    hop_cost: f64,
    out: *mut f64,
) -> NetlifeStatus {
    write_f64(out, lifetime::predict_absolute(init_energy, capacity, hop_cost))
}

/// `k * E0 / (min(rho * tau0, C) * dE)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn netlife_predict_unified(
    init_energy: f64,
    gen_rate: f64,
    tau0: f64,
    capacity: f64,
    hop_cost: f64,
    k: f64,
    out: *mut f64,
) -> NetlifeStatus {
    write_f64(
        out,
        lifetime::predict_unified(init_energy, gen_rate, tau0, capacity, hop_cost, k),
    )
}

/// `k = T * min(rho * tau0, C) * dE / E0`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn netlife_extract_k(
    lifetime: f64,
    init_energy: f64,
    gen_rate: f64,
    tau0: f64,
    capacity: f64,
    hop_cost: f64,
    out: *mut f64,
) -> NetlifeStatus {
    write_f64(
        out,
        lifetime::extract_k(lifetime, init_energy, gen_rate, tau0, capacity, hop_cost),
    )
}
