//! C ABI for the coalmux library: opaque handles, integer status codes, and a
//! per-thread error message. The generated header lives in
//! `include/coalmux.h`.
//!
//! Ownership rules: every `*_load`/`*_generate`/`coal_infer` out-pointer hands
//! the caller an owned handle that must be released with the matching
//! `*_free`; a partition handle stays valid independently of the network it
//! was derived from, but scoring requires a network with the same shape.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use coalmux::netmodel::{
    load_network_with, network_paths, CouplingSpec, ModelParams, MultilayerNetwork,
    MultilayerPartition, PartitionDoc,
};
use coalmux::pipeline::{evaluate, SelectionConfig, SelectionMode};
use coalmux::quality::{multilayer_modularity, total_loglik_with};
use coalmux::CoalError;

/// Status codes mirroring the CLI exit codes.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum CoalStatus {
    Ok = 0,
    /// Invalid arguments (null pointers, bad UTF-8, domain violations).
    Usage = 2,
    /// Malformed or inconsistent data.
    Data = 3,
    /// Numeric degeneracy.
    Numeric = 4,
}

/// Opaque multilayer network handle.
pub struct CoalNetwork(MultilayerNetwork);

/// Opaque partition handle: assignment plus the parameters it was produced
/// under.
pub struct CoalPartition {
    partition: MultilayerPartition,
    params: ModelParams,
    n_layers: usize,
    registry_len: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &CoalError) -> CoalStatus {
    match err.exit_code() {
        4 => CoalStatus::Numeric,
        _ => CoalStatus::Data,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (CoalStatus, String)> + std::panic::UnwindSafe) -> CoalStatus {
    match catch_unwind(f) {
        Ok(Ok(())) => {
            set_error("");
            CoalStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic in coalmux".into());
            set_error(&msg);
            CoalStatus::Data
        }
    }
}

fn coal_err(err: CoalError) -> (CoalStatus, String) {
    (status_of(&err), err.to_string())
}

fn usage(msg: &str) -> (CoalStatus, String) {
    (CoalStatus::Usage, msg.to_string())
}

unsafe fn cstr_arg(ptr: *const c_char, name: &str) -> Result<String, (CoalStatus, String)> {
    if ptr.is_null() {
        return Err(usage(&format!("{name} must not be null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map(|s| s.to_string())
        .map_err(|_| usage(&format!("{name} must be valid UTF-8")))
}

unsafe fn opt_cstr_arg(ptr: *const c_char, name: &str) -> Result<Option<PathBuf>, (CoalStatus, String)> {
    if ptr.is_null() {
        Ok(None)
    } else {
        cstr_arg(ptr, name).map(|s| Some(PathBuf::from(s)))
    }
}

fn check_shape(net: &MultilayerNetwork, part: &CoalPartition) -> Result<(), (CoalStatus, String)> {
    if part.n_layers != net.n_layers() || part.registry_len != net.registry.len() {
        return Err((
            CoalStatus::Data,
            "partition was produced for a network of different shape".into(),
        ));
    }
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn coal_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the most recent failure on this thread; empty after a success.
/// The pointer stays valid until the next coalmux call on the same thread.
#[no_mangle]
pub extern "C" fn coal_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Load a network from its CSV file set; `participation` may be null.
///
/// # Safety
/// Path arguments must be NUL-terminated strings; `out` must be a valid
/// pointer to receive the handle.
#[no_mangle]
pub unsafe extern "C" fn coal_network_load(
    vertices: *const c_char,
    layers: *const c_char,
    edges: *const c_char,
    participation: *const c_char,
    out: *mut *mut CoalNetwork,
) -> CoalStatus {
    guard(AssertUnwindSafe(|| {
        if out.is_null() {
            return Err(usage("out must not be null"));
        }
        let v = cstr_arg(vertices, "vertices")?;
        let l = cstr_arg(layers, "layers")?;
        let e = cstr_arg(edges, "edges")?;
        let p = opt_cstr_arg(participation, "participation")?;
        let net = load_network_with(
            Path::new(&v),
            Path::new(&l),
            Path::new(&e),
            p.as_deref(),
            &CouplingSpec::AllPairs,
        )
        .map_err(coal_err)?;
        *out = Box::into_raw(Box::new(CoalNetwork(net)));
        Ok(())
    }))
}

/// Load a network from a directory holding the conventional file names.
///
/// # Safety
/// See [`coal_network_load`].
#[no_mangle]
pub unsafe extern "C" fn coal_network_from_dir(
    dir: *const c_char,
    out: *mut *mut CoalNetwork,
) -> CoalStatus {
    guard(AssertUnwindSafe(|| {
        if out.is_null() {
            return Err(usage("out must not be null"));
        }
        let d = cstr_arg(dir, "dir")?;
        let (v, l, e, p) = network_paths(Path::new(&d));
        let net = load_network_with(&v, &l, &e, p.as_deref(), &CouplingSpec::AllPairs)
            .map_err(coal_err)?;
        *out = Box::into_raw(Box::new(CoalNetwork(net)));
        Ok(())
    }))
}

/// Generate a planted benchmark network from a recipe JSON (see the synth
/// subcommand); returns the network and its ground-truth partition.
///
/// # Safety
/// `spec_json` must be a NUL-terminated string; out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn coal_synth_generate(
    spec_json: *const c_char,
    seed: u64,
    out_net: *mut *mut CoalNetwork,
    out_truth: *mut *mut CoalPartition,
) -> CoalStatus {
    guard(AssertUnwindSafe(|| {
        if out_net.is_null() || out_truth.is_null() {
            return Err(usage("out pointers must not be null"));
        }
        let json = cstr_arg(spec_json, "spec_json")?;
        let mut spec: coalmux::synth::SyntheticSpec =
            serde_json::from_str(&json).map_err(|e| (CoalStatus::Data, e.to_string()))?;
        spec.seed = seed;
        let (net, truth) = coalmux::synth::generate(&spec).map_err(coal_err)?;
        let params = ModelParams::uniform(&net, 1.0, 0.0).with_k_max(Some(2 * spec.k));
        let handle = CoalPartition {
            n_layers: net.n_layers(),
            registry_len: net.registry.len(),
            partition: truth,
            params,
        };
        *out_net = Box::into_raw(Box::new(CoalNetwork(net)));
        *out_truth = Box::into_raw(Box::new(handle));
        Ok(())
    }))
}

/// # Safety
/// `net` must be a handle produced by this library, or null.
#[no_mangle]
pub unsafe extern "C" fn coal_network_free(net: *mut CoalNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// # Safety
/// `partition` must be a handle produced by this library, or null.
#[no_mangle]
pub unsafe extern "C" fn coal_partition_free(partition: *mut CoalPartition) {
    if !partition.is_null() {
        drop(Box::from_raw(partition));
    }
}

/// # Safety
/// `net` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn coal_network_layer_count(
    net: *const CoalNetwork,
    out: *mut usize,
) -> CoalStatus {
    guard(AssertUnwindSafe(|| {
        if net.is_null() || out.is_null() {
            return Err(usage("net and out must not be null"));
        }
        *out = (*net).0.n_layers();
        Ok(())
    }))
}

/// # Safety
/// `net` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn coal_network_vertex_count(
    net: *const CoalNetwork,
    out: *mut usize,
) -> CoalStatus {
    guard(AssertUnwindSafe(|| {
        if net.is_null() || out.is_null() {
            return Err(usage("net and out must not be null"));
        }
        *out = (*net).0.registry.len();
        Ok(())
    }))
}

/// Keep only edges significant at `alpha` under the weight-redistribution
/// null; the result is a new network handle.
///
/// # Safety
/// `net` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn coal_backbone(
    net: *const CoalNetwork,
    alpha: f64,
    out: *mut *mut CoalNetwork,
) -> CoalStatus {
    guard(AssertUnwindSafe(|| {
        if net.is_null() || out.is_null() {
            return Err(usage("net and out must not be null"));
        }
        let (filtered, _) = coalmux::backbone::filter_network(&(*net).0, alpha).map_err(coal_err)?;
        *out = Box::into_raw(Box::new(CoalNetwork(filtered)));
        Ok(())
    }))
}

/// Maximise at uniform parameters with `runs` consensus-reconciled seeded
/// runs. `k_max` of zero means unbounded.
///
/// # Safety
/// `net` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn coal_infer(
    net: *const CoalNetwork,
    gamma: f64,
    omega: f64,
    k_max: u32,
    runs: u32,
    seed: u64,
    out: *mut *mut CoalPartition,
) -> CoalStatus {
    guard(AssertUnwindSafe(|| {
        if net.is_null() || out.is_null() {
            return Err(usage("net and out must not be null"));
        }
        let network = &(*net).0;
        if !gamma.is_finite() || gamma <= 0.0 || omega < 0.0 || runs == 0 {
            return Err(usage("require gamma > 0, omega >= 0, runs >= 1"));
        }
        let cap = (k_max > 0).then_some(k_max);
        let params = ModelParams::uniform(network, gamma, omega).with_k_max(cap);
        let config = SelectionConfig {
            runs_per_eval: runs,
            base_seed: seed,
            k_max: vec![cap],
            mode: SelectionMode::Multilayer,
            ..SelectionConfig::default()
        };
        let (partition, _) = evaluate(network, &params, &config, 0).map_err(coal_err)?;
        *out = Box::into_raw(Box::new(CoalPartition {
            n_layers: network.n_layers(),
            registry_len: network.registry.len(),
            partition,
            params,
        }));
        Ok(())
    }))
}

/// Profile log-likelihood of a partition: intra and inter sums plus the
/// total.
///
/// # Safety
/// Handles must be live; out-pointers valid.
#[no_mangle]
pub unsafe extern "C" fn coal_score(
    net: *const CoalNetwork,
    partition: *const CoalPartition,
    out_intra: *mut f64,
    out_inter: *mut f64,
    out_total: *mut f64,
) -> CoalStatus {
    guard(AssertUnwindSafe(|| {
        if net.is_null() || partition.is_null() {
            return Err(usage("net and partition must not be null"));
        }
        let network = &(*net).0;
        let handle = &*partition;
        check_shape(network, handle)?;
        let scores =
            total_loglik_with(network, &handle.partition, &handle.params.k_max).map_err(coal_err)?;
        if !out_intra.is_null() {
            *out_intra = scores.intra_sum();
        }
        if !out_inter.is_null() {
            *out_inter = scores.inter_sum();
        }
        if !out_total.is_null() {
            *out_total = scores.total;
        }
        Ok(())
    }))
}

/// Multilayer modularity of a partition under its stored parameters.
///
/// # Safety
/// Handles must be live; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn coal_modularity(
    net: *const CoalNetwork,
    partition: *const CoalPartition,
    out: *mut f64,
) -> CoalStatus {
    guard(AssertUnwindSafe(|| {
        if net.is_null() || partition.is_null() || out.is_null() {
            return Err(usage("net, partition, out must not be null"));
        }
        let network = &(*net).0;
        let handle = &*partition;
        check_shape(network, handle)?;
        *out = multilayer_modularity(network, &handle.params, &handle.partition).map_err(coal_err)?;
        Ok(())
    }))
}

/// Community label of one (vertex, layer) pair: -1 when the vertex does not
/// participate in the layer.
///
/// # Safety
/// Handles must be live; strings NUL-terminated; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn coal_partition_label(
    net: *const CoalNetwork,
    partition: *const CoalPartition,
    layer_token: *const c_char,
    vertex_id: *const c_char,
    out: *mut i64,
) -> CoalStatus {
    guard(AssertUnwindSafe(|| {
        if net.is_null() || partition.is_null() || out.is_null() {
            return Err(usage("net, partition, out must not be null"));
        }
        let network = &(*net).0;
        let handle = &*partition;
        check_shape(network, handle)?;
        let token = cstr_arg(layer_token, "layer_token")?;
        let vid = cstr_arg(vertex_id, "vertex_id")?;
        let layer = network
            .layer_index(&token)
            .ok_or_else(|| (CoalStatus::Data, format!("unknown layer {token}")))?;
        let vertex = network
            .registry
            .index_of(&vid)
            .ok_or_else(|| (CoalStatus::Data, format!("unknown vertex {vid}")))?;
        *out = handle
            .partition
            .label(layer, vertex)
            .map(i64::from)
            .unwrap_or(-1);
        Ok(())
    }))
}

/// Write the versioned partition document.
///
/// # Safety
/// Handles must be live; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn coal_partition_save(
    net: *const CoalNetwork,
    partition: *const CoalPartition,
    path: *const c_char,
) -> CoalStatus {
    guard(AssertUnwindSafe(|| {
        if net.is_null() || partition.is_null() {
            return Err(usage("net and partition must not be null"));
        }
        let network = &(*net).0;
        let handle = &*partition;
        check_shape(network, handle)?;
        let p = cstr_arg(path, "path")?;
        let scores =
            total_loglik_with(network, &handle.partition, &handle.params.k_max).map_err(coal_err)?;
        let doc = PartitionDoc::build(
            network,
            &handle.partition,
            &handle.params,
            &scores.intra,
            &scores.inter,
            scores.total,
            None,
        );
        coalmux::netmodel::save_partition(Path::new(&p), &doc).map_err(coal_err)?;
        Ok(())
    }))
}

/// Load a partition document and bind it to a network.
///
/// # Safety
/// `net` must be a live handle; `path` NUL-terminated; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn coal_partition_load(
    net: *const CoalNetwork,
    path: *const c_char,
    out: *mut *mut CoalPartition,
) -> CoalStatus {
    guard(AssertUnwindSafe(|| {
        if net.is_null() || out.is_null() {
            return Err(usage("net and out must not be null"));
        }
        let network = &(*net).0;
        let p = cstr_arg(path, "path")?;
        let doc = coalmux::netmodel::load_partition(Path::new(&p)).map_err(coal_err)?;
        let (partition, params) = doc.resolve(network).map_err(coal_err)?;
        *out = Box::into_raw(Box::new(CoalPartition {
            n_layers: network.n_layers(),
            registry_len: network.registry.len(),
            partition,
            params,
        }));
        Ok(())
    }))
}

/// Reduced mutual information between two partitions over their common
/// domain; set `normalized` for the self-similarity-normalized variant.
///
/// # Safety
/// Handles must be live; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn coal_rmi(
    net: *const CoalNetwork,
    a: *const CoalPartition,
    b: *const CoalPartition,
    normalized: bool,
    out: *mut f64,
) -> CoalStatus {
    guard(AssertUnwindSafe(|| {
        if net.is_null() || a.is_null() || b.is_null() || out.is_null() {
            return Err(usage("net, a, b, out must not be null"));
        }
        let network = &(*net).0;
        check_shape(network, &*a)?;
        check_shape(network, &*b)?;
        let score =
            coalmux::metrics::rmi_partitions(network, &(*a).partition, &(*b).partition, normalized)
                .map_err(coal_err)?;
        *out = score.value;
        Ok(())
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;
    use std::ptr;

    fn c(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    fn synth_pair() -> (*mut CoalNetwork, *mut CoalPartition) {
        let spec = c(r#"{
            "n": 30, "modes": 2, "slices": 1, "k": 2,
            "p_in": 0.6, "p_out": 0.05, "structure": "pillar"
        }"#);
        let mut net: *mut CoalNetwork = ptr::null_mut();
        let mut truth: *mut CoalPartition = ptr::null_mut();
        let status = unsafe { coal_synth_generate(spec.as_ptr(), 4, &mut net, &mut truth) };
        assert!(status == CoalStatus::Ok);
        (net, truth)
    }

    #[test]
    fn version_is_nul_terminated() {
        let v = unsafe { CStr::from_ptr(coal_version()) };
        assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }

    #[test]
    fn synth_infer_score_roundtrip() {
        let (net, truth) = synth_pair();
        let mut layers = 0usize;
        assert!(unsafe { coal_network_layer_count(net, &mut layers) } == CoalStatus::Ok);
        assert_eq!(layers, 2);

        let mut part: *mut CoalPartition = ptr::null_mut();
        let status = unsafe { coal_infer(net, 1.0, 0.5, 2, 3, 11, &mut part) };
        assert!(status == CoalStatus::Ok);

        let (mut intra, mut inter, mut total) = (0.0, 0.0, 0.0);
        assert!(
            unsafe { coal_score(net, part, &mut intra, &mut inter, &mut total) } == CoalStatus::Ok
        );
        assert!((intra + inter - total).abs() < 1e-9);
        assert!(total > 0.0);

        // A strong planted instance is recovered exactly.
        let mut similarity = 0.0;
        assert!(unsafe { coal_rmi(net, part, truth, true, &mut similarity) } == CoalStatus::Ok);
        assert!(similarity > 0.99, "normalized RMI {similarity}");

        let mut q = 0.0;
        assert!(unsafe { coal_modularity(net, part, &mut q) } == CoalStatus::Ok);
        assert!(q > 0.0);

        unsafe {
            coal_partition_free(part);
            coal_partition_free(truth);
            coal_network_free(net);
        }
    }

    #[test]
    fn save_load_and_label_lookup() {
        let dir = tempfile::tempdir().unwrap();
        let (net, truth) = synth_pair();
        let path = c(dir.path().join("partition.json").to_str().unwrap());
        assert!(unsafe { coal_partition_save(net, truth, path.as_ptr()) } == CoalStatus::Ok);

        let mut loaded: *mut CoalPartition = ptr::null_mut();
        assert!(
            unsafe { coal_partition_load(net, path.as_ptr(), &mut loaded) } == CoalStatus::Ok
        );
        let mut same = 0.0;
        assert!(unsafe { coal_rmi(net, truth, loaded, true, &mut same) } == CoalStatus::Ok);
        assert!((same - 1.0).abs() < 1e-12);

        let token = c("M0_T0");
        let vid = c("v00");
        let mut label = -2i64;
        assert!(
            unsafe {
                coal_partition_label(net, loaded, token.as_ptr(), vid.as_ptr(), &mut label)
            } == CoalStatus::Ok
        );
        assert!(label >= 0);

        unsafe {
            coal_partition_free(loaded);
            coal_partition_free(truth);
            coal_network_free(net);
        }
    }

    #[test]
    fn errors_set_message_and_codes() {
        let status = unsafe {
            coal_network_from_dir(c("/nonexistent/dir").as_ptr(), ptr::null_mut())
        };
        assert!(status == CoalStatus::Usage);
        let mut out: *mut CoalNetwork = ptr::null_mut();
        let status = unsafe { coal_network_from_dir(c("/nonexistent/dir").as_ptr(), &mut out) };
        assert!(status == CoalStatus::Data);
        let msg = unsafe { CStr::from_ptr(coal_last_error()) };
        assert!(!msg.to_bytes().is_empty());

        // Shape mismatch between partition and network is caught.
        let (net_a, truth_a) = synth_pair();
        let spec = c(r#"{
            "n": 10, "modes": 1, "slices": 1, "k": 2,
            "p_in": 0.6, "p_out": 0.05, "structure": "pillar"
        }"#);
        let mut net_b: *mut CoalNetwork = ptr::null_mut();
        let mut truth_b: *mut CoalPartition = ptr::null_mut();
        assert!(
            unsafe { coal_synth_generate(spec.as_ptr(), 1, &mut net_b, &mut truth_b) }
                == CoalStatus::Ok
        );
        let mut out_val = 0.0;
        let status = unsafe { coal_score(net_a, truth_b, ptr::null_mut(), ptr::null_mut(), &mut out_val) };
        assert!(status == CoalStatus::Data);

        unsafe {
            coal_partition_free(truth_a);
            coal_partition_free(truth_b);
            coal_network_free(net_a);
            coal_network_free(net_b);
        }
    }
}
