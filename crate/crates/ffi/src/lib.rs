//! C ABI over the motion-space model: load a checkpoint, map audio clips to
//! center features, sample trajectories and stitch offset clips.
//!
//! Every fallible call returns an [`MsStatus`]. On failure a message is kept
//! per thread and can be read with [`ms_last_error`]. Arrays are caller-owned
//! `double` buffers; lengths are element counts.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use motionspace::encoders::AudioClipFeature;
use motionspace::pose::{OffsetClip, PoseFrame};
use motionspace::sampler::{stitch_clips, SampleConfig};
use motionspace::{load_checkpoint, Error, MotionModel, AUDIO_FRAME_DIM};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    BufferTooSmall = 4,
    ParseError = 5,
    IoError = 6,
    Internal = 7,
}

/// Opaque handle to a loaded model.
pub struct MsModel {
    inner: MotionModel,
}

/// Values per audio frame.
pub const MS_AUDIO_FRAME_DIM: usize = 256;
const _: () = assert!(MS_AUDIO_FRAME_DIM == AUDIO_FRAME_DIM);
/// Values per pose frame: roll, pitch, yaw, tx, ty, tz.
pub const MS_POSE_DIM: usize = 6;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(MsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Shape { .. } => MsStatus::ShapeMismatch,
            Error::Parse { .. } => MsStatus::ParseError,
            Error::Io { .. } => MsStatus::IoError,
            Error::Diverged { .. } => MsStatus::Internal,
            _ => MsStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

type Outcome = std::result::Result<(), Failure>;

fn null(what: &str) -> Failure {
    Failure(MsStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Outcome) -> MsStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MsStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            MsStatus::Internal
        }
    }
}

unsafe fn model_ref<'a>(model: *const MsModel) -> std::result::Result<&'a MotionModel, Failure> {
    // SAFETY: caller passes null or a live handle from ms_model_load
    unsafe { model.as_ref() }.map(|m| &m.inner).ok_or_else(|| null("model"))
}

unsafe fn input<'a>(ptr: *const f64, len: usize, what: &str) -> std::result::Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    // SAFETY: caller guarantees `len` readable doubles at `ptr`
    Ok(unsafe { std::slice::from_raw_parts(ptr, len) })
}

unsafe fn output<'a>(ptr: *mut f64, len: usize, needed: usize, what: &str) -> std::result::Result<&'a mut [f64], Failure> {
    if ptr.is_null() {
        return Err(null(what));
    }
    if len < needed {
        return Err(Failure(
            MsStatus::BufferTooSmall,
            format!("{what} holds {len} values, {needed} needed"),
        ));
    }
    // SAFETY: caller guarantees `len` writable doubles at `ptr`
    Ok(unsafe { std::slice::from_raw_parts_mut(ptr, needed) })
}

unsafe fn pose(ptr: *const f64) -> std::result::Result<PoseFrame, Failure> {
    let v = unsafe { input(ptr, MS_POSE_DIM, "initial pose") }?;
    Ok(PoseFrame::new([v[0], v[1], v[2]], [v[3], v[4], v[5]])?)
}

fn audio_clips(values: &[f64], t: usize) -> std::result::Result<Vec<AudioClipFeature>, Failure> {
    let block = t * AUDIO_FRAME_DIM;
    if values.is_empty() || !values.len().is_multiple_of(block) {
        return Err(Failure(
            MsStatus::ShapeMismatch,
            format!("audio holds {} values, not a positive multiple of {block}", values.len()),
        ));
    }
    Ok(values
        .chunks_exact(block)
        .map(|c| AudioClipFeature::new(c.to_vec(), t))
        .collect::<motionspace::Result<_>>()?)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ms_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn ms_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Frames of a trajectory stitched from `num_clips` clips of `clip_len`.
#[no_mangle]
pub extern "C" fn ms_trajectory_len(clip_len: usize, num_clips: usize) -> usize {
    if clip_len == 0 || num_clips == 0 {
        return 0;
    }
    clip_len + (num_clips - 1) * (clip_len - 1)
}

/// Loads a checkpoint file into a new handle stored in `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ms_model_load(path: *const c_char, out: *mut *mut MsModel) -> MsStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        // SAFETY: checked non-null; caller guarantees NUL termination
        let path = unsafe { CStr::from_ptr(path) }
            .to_str()
            .map_err(|_| Failure(MsStatus::InvalidArgument, "path is not UTF-8".into()))?;
        let ckpt = load_checkpoint(&PathBuf::from(path))?;
        let handle = Box::into_raw(Box::new(MsModel { inner: ckpt.model }));
        // SAFETY: checked non-null
        unsafe { *out = handle };
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `model` must be null or a handle from `ms_model_load` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ms_model_free(model: *mut MsModel) {
    if !model.is_null() {
        // SAFETY: handle came from Box::into_raw in ms_model_load
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Frames per clip `t`, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ms_model_clip_len(model: *const MsModel) -> usize {
    unsafe { model_ref(model) }.map_or(0, |m| m.clip_len())
}

/// Number of motion bases `S`, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ms_model_basis_count(model: *const MsModel) -> usize {
    unsafe { model_ref(model) }.map_or(0, |m| m.bank.size())
}

/// Motion feature dimension `C`, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ms_model_feature_dim(model: *const MsModel) -> usize {
    unsafe { model_ref(model) }.map_or(0, |m| m.bank.dim())
}

/// Attention weights over the bases for one audio clip of
/// `t * MS_AUDIO_FRAME_DIM` values. Writes `S` values.
///
/// # Safety
/// Pointers must be valid for the given lengths.
#[no_mangle]
pub unsafe extern "C" fn ms_model_audio_weights(
    model: *const MsModel,
    audio: *const f64,
    audio_len: usize,
    out: *mut f64,
    out_len: usize,
) -> MsStatus {
    guard(|| {
        let m = unsafe { model_ref(model) }?;
        let clips = audio_clips(unsafe { input(audio, audio_len, "audio") }?, m.clip_len())?;
        if clips.len() != 1 {
            return Err(Error::shape("audio clips", 1, clips.len()).into());
        }
        let w = m.audio_weights(&clips[0])?;
        unsafe { output(out, out_len, w.len(), "out") }?.copy_from_slice(w.values());
        Ok(())
    })
}

/// Center motion feature for one audio clip. Writes `C` values.
///
/// # Safety
/// Pointers must be valid for the given lengths.
#[no_mangle]
pub unsafe extern "C" fn ms_model_center(
    model: *const MsModel,
    audio: *const f64,
    audio_len: usize,
    out: *mut f64,
    out_len: usize,
) -> MsStatus {
    guard(|| {
        let m = unsafe { model_ref(model) }?;
        let clips = audio_clips(unsafe { input(audio, audio_len, "audio") }?, m.clip_len())?;
        if clips.len() != 1 {
            return Err(Error::shape("audio clips", 1, clips.len()).into());
        }
        let c = m.center(&clips[0])?;
        unsafe { output(out, out_len, c.dim(), "out") }?.copy_from_slice(c.values());
        Ok(())
    })
}

/// Samples `num_samples` trajectories for consecutive audio clips. `audio`
/// holds `n * t * MS_AUDIO_FRAME_DIM` values; `initial` holds 6. Writes
/// `num_samples * ms_trajectory_len(t, n) * 6` values, sample-major.
///
/// # Safety
/// Pointers must be valid for the given lengths.
#[no_mangle]
pub unsafe extern "C" fn ms_model_sample(
    model: *const MsModel,
    audio: *const f64,
    audio_len: usize,
    epsilon: f64,
    seed: u64,
    num_samples: usize,
    initial: *const f64,
    out: *mut f64,
    out_len: usize,
) -> MsStatus {
    guard(|| {
        let m = unsafe { model_ref(model) }?;
        let clips = audio_clips(unsafe { input(audio, audio_len, "audio") }?, m.clip_len())?;
        let cfg = SampleConfig::new(epsilon, seed, num_samples)?;
        let start = unsafe { pose(initial) }?;
        let frames = ms_trajectory_len(m.clip_len(), clips.len());
        let dst = unsafe { output(out, out_len, num_samples * frames * MS_POSE_DIM, "out") }?;
        let samples = m.sample_trajectories(&clips, &cfg, start)?;
        for (v, p) in dst.chunks_exact_mut(MS_POSE_DIM).zip(samples.iter().flatten()) {
            v.copy_from_slice(&p.to_vec6());
        }
        Ok(())
    })
}

/// Stitches `num_clips` offset clips of `clip_len` frames (6 values per
/// frame, first frame of each clip all zero) from `initial`. Writes
/// `ms_trajectory_len(clip_len, num_clips) * 6` values.
///
/// # Safety
/// Pointers must be valid for the given lengths.
#[no_mangle]
pub unsafe extern "C" fn ms_stitch(
    offsets: *const f64,
    num_clips: usize,
    clip_len: usize,
    initial: *const f64,
    out: *mut f64,
    out_len: usize,
) -> MsStatus {
    guard(|| {
        if num_clips == 0 || clip_len < 2 {
            return Err(Failure(
                MsStatus::InvalidArgument,
                "need at least one clip of two or more frames".into(),
            ));
        }
        let block = clip_len * MS_POSE_DIM;
        let values = unsafe { input(offsets, num_clips * block, "offsets") }?;
        let clips = values
            .chunks_exact(block)
            .map(|c| {
                OffsetClip::new(
                    c.chunks_exact(MS_POSE_DIM)
                        .map(|f| std::array::from_fn(|k| f[k]))
                        .collect(),
                )
            })
            .collect::<motionspace::Result<Vec<_>>>()?;
        let start = unsafe { pose(initial) }?;
        let frames = ms_trajectory_len(clip_len, num_clips);
        let dst = unsafe { output(out, out_len, frames * MS_POSE_DIM, "out") }?;
        let stitched = stitch_clips(&clips, start)?;
        for (v, p) in dst.chunks_exact_mut(MS_POSE_DIM).zip(&stitched) {
            v.copy_from_slice(&p.to_vec6());
        }
        Ok(())
    })
}
