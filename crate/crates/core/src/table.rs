use alloc::string::String;
use alloc::vec::Vec;

/// Header plus string rows; the in-memory form of every CSV the toolkit
/// reads or writes.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Table {
        Table {
            header,
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Read access to one row by column name.
#[derive(Debug, Clone, Copy)]
pub struct RowView<'a> {
    pub header: &'a [String],
    pub cells: &'a [String],
}

impl<'a> RowView<'a> {
    pub fn get(&self, name: &str) -> Option<&'a str> {
        let i = self.header.iter().position(|h| h == name)?;
        self.cells.get(i).map(|s| s.trim())
    }
}
