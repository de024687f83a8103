//! In-memory RGB image with channels in `[0, 1]`, row-major storage.

use serde::{Deserialize, Serialize};

use crate::model::Color;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Image<T> {
    width: u32,
    height: u32,
    /// `height * width * 3` interleaved RGB samples, row-major.
    data: Vec<T>,
}

impl<T: Scalar> Image<T> {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![T::zero(); width as usize * height as usize * 3],
        }
    }

    pub fn filled(width: u32, height: u32, color: Color<T>) -> Self {
        let mut img = Self::new(width, height);
        for row in 0..height {
            for col in 0..width {
                img.set_pixel(row, col, color);
            }
        }
        img
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> Color<T>) -> Self {
        let mut img = Self::new(width, height);
        for row in 0..height {
            for col in 0..width {
                img.set_pixel(row, col, f(row, col));
            }
        }
        img
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    fn offset(&self, row: u32, col: u32) -> usize {
        debug_assert!(row < self.height && col < self.width);
        (row as usize * self.width as usize + col as usize) * 3
    }

    pub fn pixel(&self, row: u32, col: u32) -> Color<T> {
        let o = self.offset(row, col);
        Color::new(self.data[o], self.data[o + 1], self.data[o + 2])
    }

    pub fn set_pixel(&mut self, row: u32, col: u32, c: Color<T>) {
        let o = self.offset(row, col);
        self.data[o] = c.r;
        self.data[o + 1] = c.g;
        self.data[o + 2] = c.b;
    }

    pub fn same_dimensions(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height
    }
}
