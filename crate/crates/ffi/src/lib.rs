//! C interface to dbcore.
//!
//! Every fallible function returns a [`DbcStatus`]; results come back
//! through out-pointers. Objects are opaque handles released with their
//! matching `*_free` function. The message for the most recent failure on
//! the calling thread is available from [`dbc_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, UnwindSafe};
use std::ptr;
use std::slice;

use dbcore::binarization::{db_forward, db_loss_grads};
use dbcore::geometry::{self, Polygon};
use dbcore::labelgen::{generate_labels, LabelBundle, LabelConfig};
use dbcore::map::FloatMap;
use dbcore::postprocess::{form_boxes, Detection, PostprocessConfig};
use dbcore::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DbcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidPolygon = 3,
    ShapeMismatch = 4,
    Domain = 5,
    Io = 6,
    Parse = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

/// Which map of a label bundle to copy out.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DbcLabelMap {
    ProbTarget = 0,
    ProbMask = 1,
    ThreshTarget = 2,
    ThreshMask = 3,
}

/// Row-major real-valued map.
pub struct DbcMap(FloatMap);

pub struct DbcLabels(LabelBundle);

pub struct DbcDetections(Vec<Detection>);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn fail(status: DbcStatus, msg: impl Into<String>) -> DbcStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
    status
}

fn from_error(err: Error) -> DbcStatus {
    let status = match &err {
        Error::InvalidPolygon(_) => DbcStatus::InvalidPolygon,
        Error::ShapeMismatch { .. } | Error::StageCountMismatch { .. } => DbcStatus::ShapeMismatch,
        Error::Io(_) => DbcStatus::Io,
        Error::Parse { .. } | Error::Format(_) => DbcStatus::Parse,
        _ => DbcStatus::Domain,
    };
    fail(status, err.to_string())
}

fn guard(f: impl FnOnce() -> Result<(), DbcStatus> + UnwindSafe) -> DbcStatus {
    match catch_unwind(f) {
        Ok(Ok(())) => DbcStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(DbcStatus::Panic, "internal panic"),
    }
}

fn null(what: &str) -> DbcStatus {
    fail(DbcStatus::NullPointer, format!("{what} is null"))
}

unsafe fn reference<'a, T>(p: *const T, what: &str) -> Result<&'a T, DbcStatus> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn input_slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], DbcStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), DbcStatus> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn path_arg(p: *const c_char) -> Result<String, DbcStatus> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| fail(DbcStatus::InvalidArgument, "path is not UTF-8"))
}

unsafe fn polygon_arg(coords: *const f64, n_vertices: usize) -> Result<Polygon, DbcStatus> {
    let xy = input_slice(coords, 2 * n_vertices, "coords")?;
    let pts: Vec<(f64, f64)> = xy.chunks_exact(2).map(|c| (c[0], c[1])).collect();
    Polygon::from_coords(&pts).map_err(from_error)
}

/// Copies the last error message on this thread into `buf` (NUL
/// terminated, truncated to `cap`) and returns its full length in bytes.
///
/// # Safety
/// `buf` must be null or point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn dbc_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Creates a `height x width` map from `height * width` row-major values.
///
/// # Safety
/// `data` must point to `height * width` readable doubles; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn dbc_map_new(height: usize, width: usize, data: *const f64, out: *mut *mut DbcMap) -> DbcStatus {
    guard(|| {
        let len = height
            .checked_mul(width)
            .ok_or_else(|| fail(DbcStatus::InvalidArgument, "map size overflows"))?;
        let values = input_slice(data, len, "data")?.to_vec();
        let map = FloatMap::from_vec(height, width, values).map_err(from_error)?;
        store(out, DbcMap(map))
    })
}

/// Loads a map from an F32MAP file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dbc_map_load(path: *const c_char, out: *mut *mut DbcMap) -> DbcStatus {
    guard(|| {
        let path = path_arg(path)?;
        store(out, DbcMap(FloatMap::load(path).map_err(from_error)?))
    })
}

/// # Safety
/// `map` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn dbc_map_save(map: *const DbcMap, path: *const c_char) -> DbcStatus {
    guard(|| {
        let map = reference(map, "map")?;
        map.0.save(path_arg(path)?).map_err(from_error)
    })
}

/// # Safety
/// `map` must be a live handle; the out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn dbc_map_shape(map: *const DbcMap, height: *mut usize, width: *mut usize) -> DbcStatus {
    guard(|| {
        let map = reference(map, "map")?;
        if height.is_null() || width.is_null() {
            return Err(null("shape output"));
        }
        (*height, *width) = map.0.shape();
        Ok(())
    })
}

/// Copies the values into `buf`, which must hold `height * width` doubles.
///
/// # Safety
/// `map` must be a live handle and `buf` must point to `cap` writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn dbc_map_read(map: *const DbcMap, buf: *mut f64, cap: usize) -> DbcStatus {
    guard(|| {
        let map = reference(map, "map")?;
        let data = map.0.data();
        if cap < data.len() {
            return Err(fail(
                DbcStatus::BufferTooSmall,
                format!("need {} values, buffer holds {cap}", data.len()),
            ));
        }
        if !data.is_empty() {
            if buf.is_null() {
                return Err(null("buffer"));
            }
            ptr::copy_nonoverlapping(data.as_ptr(), buf, data.len());
        }
        Ok(())
    })
}

/// # Safety
/// `map` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dbc_map_free(map: *mut DbcMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// Approximate binary map `1 / (1 + exp(-k (P - T)))`.
///
/// # Safety
/// `prob` and `thresh` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dbc_db_forward(
    prob: *const DbcMap,
    thresh: *const DbcMap,
    k: f64,
    out: *mut *mut DbcMap,
) -> DbcStatus {
    guard(|| {
        let (p, t) = (reference(prob, "prob")?, reference(thresh, "thresh")?);
        store(out, DbcMap(db_forward(&p.0, &t.0, k).map_err(from_error)?))
    })
}

/// Derivatives of the DB loss with respect to the binarization input `x`
/// for positive and negative labels.
///
/// # Safety
/// `pos` and `neg` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dbc_db_loss_grads(x: f64, k: f64, pos: *mut f64, neg: *mut f64) -> DbcStatus {
    guard(|| {
        if pos.is_null() || neg.is_null() {
            return Err(null("gradient output"));
        }
        let g = db_loss_grads(x, k);
        (*pos, *neg) = (g.pos, g.neg);
        Ok(())
    })
}

/// Shrink (`shrink = true`, ratio `r`) or unclip (ratio `r'`) offset
/// distance for a polygon of `n_vertices` interleaved `x, y` pairs.
///
/// # Safety
/// `coords` must point to `2 * n_vertices` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dbc_offset_distance(
    coords: *const f64,
    n_vertices: usize,
    ratio: f64,
    shrink: bool,
    out: *mut f64,
) -> DbcStatus {
    guard(|| {
        let poly = polygon_arg(coords, n_vertices)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = if shrink {
            geometry::shrink_offset(&poly, ratio)
        } else {
            geometry::unclip_offset(&poly, ratio)
        };
        Ok(())
    })
}

/// Label maps for `n_polys` polygons. Polygon `i` has `counts[i]`
/// vertices; all vertices are concatenated in `coords` as `x, y` pairs.
///
/// # Safety
/// `counts` must hold `n_polys` entries and `coords` twice their sum;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dbc_labels_generate(
    coords: *const f64,
    counts: *const usize,
    n_polys: usize,
    height: usize,
    width: usize,
    shrink_ratio: f64,
    t_min: f64,
    t_max: f64,
    out: *mut *mut DbcLabels,
) -> DbcStatus {
    guard(|| {
        let counts = input_slice(counts, n_polys, "counts")?;
        let total = counts
            .iter()
            .try_fold(0usize, |a, &c| a.checked_add(c))
            .ok_or_else(|| fail(DbcStatus::InvalidArgument, "vertex count overflows"))?;
        let xy = input_slice(coords, 2 * total, "coords")?;
        let mut polys = Vec::with_capacity(n_polys);
        let mut at = 0;
        for &c in counts {
            polys.push(polygon_arg(xy[2 * at..].as_ptr(), c)?);
            at += c;
        }
        let cfg = LabelConfig {
            shrink_ratio,
            t_min,
            t_max,
        };
        store(out, DbcLabels(generate_labels(&polys, height, width, &cfg).map_err(from_error)?))
    })
}

/// Copies one map of the bundle into a new map handle.
///
/// # Safety
/// `labels` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dbc_labels_map(labels: *const DbcLabels, which: DbcLabelMap, out: *mut *mut DbcMap) -> DbcStatus {
    guard(|| {
        let l = &reference(labels, "labels")?.0;
        let m = match which {
            DbcLabelMap::ProbTarget => &l.prob_target,
            DbcLabelMap::ProbMask => &l.prob_mask,
            DbcLabelMap::ThreshTarget => &l.thresh_target,
            DbcLabelMap::ThreshMask => &l.thresh_mask,
        };
        store(out, DbcMap(m.clone()))
    })
}

/// # Safety
/// `labels` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dbc_labels_free(labels: *mut DbcLabels) {
    if !labels.is_null() {
        drop(Box::from_raw(labels));
    }
}

/// Forms text boxes from a probability map.
///
/// # Safety
/// `prob` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dbc_form_boxes(
    prob: *const DbcMap,
    bin_thresh: f64,
    unclip_ratio: f64,
    score_thresh: f64,
    min_region_px: usize,
    max_detections: usize,
    out: *mut *mut DbcDetections,
) -> DbcStatus {
    guard(|| {
        let p = &reference(prob, "prob")?.0;
        let cfg = PostprocessConfig {
            bin_thresh,
            unclip_ratio,
            min_region_px,
            score_thresh,
            max_detections,
        };
        let p = FloatMap::probabilities(p.height(), p.width(), p.data().to_vec()).map_err(from_error)?;
        store(out, DbcDetections(form_boxes(&p, &cfg).map_err(from_error)?))
    })
}

/// # Safety
/// `dets` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dbc_detections_len(dets: *const DbcDetections) -> usize {
    dets.as_ref().map_or(0, |d| d.0.len())
}

/// Score and vertex count of detection `index`; vertices are copied as
/// `x, y` pairs into `buf` when it holds at least `2 * n_vertices` doubles.
/// Pass a null `buf` to query the count alone.
///
/// # Safety
/// `dets` must be a live handle, `buf` null or `cap` writable doubles,
/// and the remaining out-pointers writable.
#[no_mangle]
pub unsafe extern "C" fn dbc_detection_get(
    dets: *const DbcDetections,
    index: usize,
    score: *mut f64,
    n_vertices: *mut usize,
    buf: *mut f64,
    cap: usize,
) -> DbcStatus {
    guard(|| {
        let d = &reference(dets, "detections")?.0;
        let det = d
            .get(index)
            .ok_or_else(|| fail(DbcStatus::InvalidArgument, format!("index {index} out of range")))?;
        if score.is_null() || n_vertices.is_null() {
            return Err(null("detection output"));
        }
        let v = det.polygon.vertices();
        *score = det.score;
        *n_vertices = v.len();
        if buf.is_null() {
            return Ok(());
        }
        if cap < 2 * v.len() {
            return Err(fail(DbcStatus::BufferTooSmall, format!("need {} values", 2 * v.len())));
        }
        for (i, p) in v.iter().enumerate() {
            *buf.add(2 * i) = p.x;
            *buf.add(2 * i + 1) = p.y;
        }
        Ok(())
    })
}

/// # Safety
/// `dets` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dbc_detections_free(dets: *mut DbcDetections) {
    if !dets.is_null() {
        drop(Box::from_raw(dets));
    }
}
