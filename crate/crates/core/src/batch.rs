use crate::error::{ensure, Result};

/// Where a window came from: its consumer and its position in that
/// consumer's window sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WindowOrigin {
    pub consumer_id: String,
    pub window_index: usize,
}

/// `N` fixed-length windows stored row-major, with provenance for each row.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceBatch {
    width: usize,
    data: Vec<f64>,
    origin: Vec<WindowOrigin>,
}

impl SequenceBatch {
    pub fn new(width: usize, data: Vec<f64>, origin: Vec<WindowOrigin>) -> Result<Self> {
        ensure!(width > 0, Shape, "window width must be positive");
        ensure!(
            data.len() == width * origin.len(),
            Shape,
            "{} values do not form {} rows of width {}",
            data.len(),
            origin.len(),
            width
        );
        Ok(Self {
            width,
            data,
            origin,
        })
    }

    /// Builds a batch from rows, labelling provenance with a synthetic id.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        ensure!(!rows.is_empty(), Shape, "batch has no rows");
        let width = rows[0].len();
        ensure!(
            rows.iter().all(|r| r.len() == width),
            Shape,
            "rows have unequal lengths"
        );
        let origin = (0..rows.len())
            .map(|i| WindowOrigin {
                consumer_id: "anon".into(),
                window_index: i,
            })
            .collect();
        Self::new(width, rows.concat(), origin)
    }

    pub fn empty(width: usize) -> Self {
        Self {
            width,
            data: Vec::new(),
            origin: Vec::new(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.origin.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origin.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn origin(&self) -> &[WindowOrigin] {
        &self.origin
    }

    pub fn push(&mut self, row: &[f64], origin: WindowOrigin) -> Result<()> {
        ensure!(
            row.len() == self.width,
            Shape,
            "row of length {} pushed into batch of width {}",
            row.len(),
            self.width
        );
        self.data.extend_from_slice(row);
        self.origin.push(origin);
        Ok(())
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.width);
        let mut origin = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(self.row(i));
            origin.push(self.origin[i].clone());
        }
        Self {
            width: self.width,
            data,
            origin,
        }
    }

    /// Same provenance, new values (e.g. reconstructions).
    pub fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        Self::new(self.width, data, self.origin.clone())
    }

    pub fn extend(&mut self, other: &SequenceBatch) -> Result<()> {
        ensure!(
            other.width == self.width,
            Shape,
            "cannot merge batches of width {} and {}",
            self.width,
            other.width
        );
        self.data.extend_from_slice(&other.data);
        self.origin.extend(other.origin.iter().cloned());
        Ok(())
    }

    pub fn ensure_same_shape(&self, other: &SequenceBatch) -> Result<()> {
        ensure!(
            self.width == other.width && self.len() == other.len(),
            Shape,
            "batch shapes differ: {}x{} vs {}x{}",
            self.len(),
            self.width,
            other.len(),
            other.width
        );
        Ok(())
    }
}
