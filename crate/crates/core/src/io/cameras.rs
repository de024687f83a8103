//! Camera metadata JSON: an array of entries with camera-to-world rotations,
//! matching the reference pipeline's export. Principal points default to the
//! image center.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::math::{Mat3, Vec3};
use crate::model::CameraView;
use crate::scalar::Scalar;

use super::images::read_image;
use super::IoError;

/// One camera as stored on disk. `rotation` is camera-to-world, row-major;
/// `position` is the camera center in world coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraFileEntry {
    pub id: u32,
    pub img_name: String,
    pub width: u32,
    pub height: u32,
    pub position: [f64; 3],
    pub rotation: [[f64; 3]; 3],
    pub fx: f64,
    pub fy: f64,
}

/// Tolerated deviation from orthonormality in the file; views are
/// re-orthonormalized after the check.
const ROTATION_TOLERANCE: f64 = 1e-4;

fn camera_error(path: &Path, index: usize, message: impl Into<String>) -> IoError {
    IoError::Camera {
        path: path.to_path_buf(),
        index,
        message: message.into(),
    }
}

fn entry_to_view<T: Scalar>(
    entry: &CameraFileEntry,
    index: usize,
    path: &Path,
) -> Result<CameraView<T>, IoError> {
    if entry.width == 0 || entry.height == 0 {
        return Err(camera_error(
            path,
            index,
            format!("image size {}x{} is empty", entry.width, entry.height),
        ));
    }
    for (name, v) in [("fx", entry.fx), ("fy", entry.fy)] {
        if !v.is_finite() || v <= 0.0 {
            return Err(camera_error(path, index, format!("{name} = {v} is not a positive focal length")));
        }
    }
    let flat = entry
        .rotation
        .iter()
        .flatten()
        .chain(entry.position.iter());
    if flat.clone().any(|v| !v.is_finite()) {
        return Err(camera_error(path, index, "non-finite pose"));
    }
    let cam_to_world = Mat3 {
        rows: entry.rotation,
    };
    let err = cam_to_world.orthonormality_error();
    if err > ROTATION_TOLERANCE {
        return Err(camera_error(
            path,
            index,
            format!("rotation deviates from orthonormal by {err:.2e} (tolerance {ROTATION_TOLERANCE:.0e})"),
        ));
    }
    // Snap to an exactly orthonormal frame, then invert.
    let world_to_cam = cam_to_world.orthonormalized_rows().transpose();
    let position = Vec3::from_array(entry.position);
    let translation = -world_to_cam.mul_vec(position);
    let rows = world_to_cam.rows;
    Ok(CameraView {
        width: entry.width,
        height: entry.height,
        fx: T::of(entry.fx),
        fy: T::of(entry.fy),
        cx: T::of(entry.width as f64 / 2.0),
        cy: T::of(entry.height as f64 / 2.0),
        rotation: Mat3 {
            rows: rows.map(|r| r.map(T::of)),
        },
        translation: Vec3::new(
            T::of(translation.x),
            T::of(translation.y),
            T::of(translation.z),
        ),
        name: entry.img_name.clone(),
        ground_truth: None,
    })
}

/// Reads a camera JSON array into render-ready views.
pub fn read_cameras<T: Scalar>(path: impl AsRef<Path>) -> Result<Vec<CameraView<T>>, IoError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(IoError::file(path))?;
    let entries: Vec<CameraFileEntry> =
        serde_json::from_str(&text).map_err(IoError::json(path))?;
    entries
        .iter()
        .enumerate()
        .map(|(index, entry)| entry_to_view(entry, index, path))
        .collect()
}

/// Writes views back in the file convention (camera-to-world rotations).
pub fn write_cameras<T: Scalar>(
    views: &[CameraView<T>],
    path: impl AsRef<Path>,
) -> Result<(), IoError> {
    let path = path.as_ref();
    let entries: Vec<CameraFileEntry> = views
        .iter()
        .enumerate()
        .map(|(index, view)| {
            let center = view.center();
            let cam_to_world = view.rotation.transpose();
            CameraFileEntry {
                id: index as u32,
                img_name: view.name.clone(),
                width: view.width,
                height: view.height,
                position: [center.x.widen(), center.y.widen(), center.z.widen()],
                rotation: cam_to_world.rows.map(|r| r.map(|v| v.widen())),
                fx: view.fx.widen(),
                fy: view.fy.widen(),
            }
        })
        .collect();
    let mut text = serde_json::to_string_pretty(&entries).map_err(IoError::json(path))?;
    text.push('\n');
    fs::write(path, text).map_err(IoError::file(path))
}

/// Loads `dir/<img_name>` as each view's ground truth, checking dimensions.
pub fn load_ground_truth<T: Scalar>(
    views: &mut [CameraView<T>],
    dir: impl AsRef<Path>,
) -> Result<(), IoError> {
    let dir = dir.as_ref();
    for view in views.iter_mut() {
        let path = dir.join(&view.name);
        let image = read_image::<T>(&path)?;
        if image.width() != view.width || image.height() != view.height {
            return Err(IoError::ImageFormat {
                path,
                message: format!(
                    "image is {}x{} but the camera expects {}x{}",
                    image.width(),
                    image.height(),
                    view.width,
                    view.height
                ),
            });
        }
        view.ground_truth = Some(image);
    }
    Ok(())
}
