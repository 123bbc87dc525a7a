//! On-disk database format.
//!
//! ```text
//! "DRPC" | u32 version | 4 × (u64 byte length | section payload)
//! ```
//!
//! Sections in order: metadata, objects, densities, candidates. All integers
//! and floats are little-endian; floats are stored as their f64 bit patterns.

use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use super::{CandidateIndex, ClassGrids, DatabaseConfig, DatabaseError, DbObject, DensityTable, GtDatabase, PartitionGrid};
use crate::geometry::{BoundingBox, LabeledObject, ObjectClass, Point, Pose};

pub const MAGIC: &[u8; 4] = b"DRPC";
pub const FORMAT_VERSION: u32 = 1;

const SECTIONS: [&str; 4] = ["metadata", "objects", "densities", "candidates"];

// Writes into a Vec never fail.
fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.write_u32::<LE>(v).unwrap();
}

fn put_f64(buf: &mut Vec<u8>, v: f64) {
    buf.write_f64::<LE>(v).unwrap();
}

fn put_len(buf: &mut Vec<u8>, n: usize) {
    put_u32(buf, u32::try_from(n).expect("database section element count exceeds u32"));
}

fn metadata_section(db: &GtDatabase) -> Vec<u8> {
    let mut b = Vec::new();
    put_len(&mut b, db.config.k);
    for g in db.config.grids.0 {
        put_u32(&mut b, g.nx);
        put_u32(&mut b, g.ny);
        put_u32(&mut b, g.nz);
    }
    put_len(&mut b, db.frame_ids.len());
    for id in &db.frame_ids {
        put_len(&mut b, id.len());
        b.extend_from_slice(id.as_bytes());
    }
    b
}

fn objects_section(db: &GtDatabase) -> Vec<u8> {
    let mut b = Vec::new();
    put_len(&mut b, db.objects.len());
    for o in &db.objects {
        b.push(o.class().index() as u8);
        put_u32(&mut b, o.source_frame);
        for v in [o.pose.x, o.pose.y, o.pose.z, o.pose.theta] {
            put_f64(&mut b, v);
        }
        let bb = &o.object.bbox;
        for v in [bb.cx, bb.cy, bb.cz, bb.l, bb.w, bb.h, bb.theta] {
            put_f64(&mut b, v);
        }
        put_len(&mut b, o.object.points.len());
        for p in &o.object.points {
            for v in [p.x, p.y, p.z, p.r] {
                put_f64(&mut b, v);
            }
        }
    }
    b
}

fn densities_section(db: &GtDatabase) -> Vec<u8> {
    let mut b = Vec::new();
    for maxima in &db.densities.class_maxima {
        put_len(&mut b, maxima.len());
        for &m in maxima {
            put_u32(&mut b, m);
        }
    }
    put_len(&mut b, db.densities.densities.len());
    for row in &db.densities.densities {
        put_len(&mut b, row.len());
        for &d in row {
            put_f64(&mut b, d);
        }
    }
    b
}

fn candidates_section(db: &GtDatabase) -> Vec<u8> {
    let mut b = Vec::new();
    put_len(&mut b, db.candidates.lists.len());
    for list in &db.candidates.lists {
        put_len(&mut b, list.len());
        for &c in list {
            put_u32(&mut b, c);
        }
    }
    b
}

/// Serializes a database. Identical databases give identical bytes.
pub fn encode_database(db: &GtDatabase) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, FORMAT_VERSION);
    for section in [metadata_section(db), objects_section(db), densities_section(db), candidates_section(db)] {
        out.write_u64::<LE>(section.len() as u64).unwrap();
        out.extend_from_slice(&section);
    }
    out
}

pub fn save_database(db: &GtDatabase, path: &Path) -> Result<(), DatabaseError> {
    std::fs::write(path, encode_database(db)).map_err(|source| DatabaseError::Io { path: path.to_path_buf(), source })
}

/// Reader over one section; running past its end means the declared length
/// disagrees with the content.
struct Section<'a> {
    name: &'static str,
    cur: Cursor<&'a [u8]>,
}

impl<'a> Section<'a> {
    fn short(&self) -> DatabaseError {
        DatabaseError::Corrupt(format!("section `{}` is shorter than its content", self.name))
    }

    fn remaining(&self) -> usize {
        self.cur.get_ref().len() - self.cur.position() as usize
    }

    fn u8(&mut self) -> Result<u8, DatabaseError> {
        self.cur.read_u8().map_err(|_| self.short())
    }

    fn u32(&mut self) -> Result<u32, DatabaseError> {
        self.cur.read_u32::<LE>().map_err(|_| self.short())
    }

    fn f64(&mut self) -> Result<f64, DatabaseError> {
        self.cur.read_f64::<LE>().map_err(|_| self.short())
    }

    /// Element count, checked against the bytes left so corrupt counts cannot
    /// trigger huge allocations.
    fn count(&mut self, elem_size: usize) -> Result<usize, DatabaseError> {
        let n = self.u32()? as usize;
        if n.saturating_mul(elem_size) > self.remaining() {
            return Err(self.short());
        }
        Ok(n)
    }

    fn finish(self) -> Result<(), DatabaseError> {
        if self.remaining() != 0 {
            return Err(DatabaseError::Corrupt(format!("trailing bytes in section `{}`", self.name)));
        }
        Ok(())
    }
}

fn read_metadata(mut s: Section) -> Result<(DatabaseConfig, Vec<String>), DatabaseError> {
    let k = s.u32()? as usize;
    let mut grids = [PartitionGrid::new(1, 1, 1); 3];
    for g in &mut grids {
        *g = PartitionGrid::new(s.u32()?, s.u32()?, s.u32()?);
        if g.nx == 0 || g.ny == 0 || g.nz == 0 || (g.nx as u64 * g.ny as u64 * g.nz as u64) > u32::MAX as u64 {
            return Err(DatabaseError::Corrupt(format!("invalid grid {g}")));
        }
    }
    let n = s.count(4)?;
    let mut frame_ids = Vec::with_capacity(n);
    for _ in 0..n {
        let len = s.count(1)?;
        let mut bytes = vec![0u8; len];
        s.cur.read_exact(&mut bytes).map_err(|_| s.short())?;
        frame_ids.push(String::from_utf8(bytes).map_err(|_| DatabaseError::Corrupt("frame id is not UTF-8".into()))?);
    }
    s.finish()?;
    Ok((DatabaseConfig { k, grids: ClassGrids(grids) }, frame_ids))
}

fn read_objects(mut s: Section) -> Result<Vec<DbObject>, DatabaseError> {
    let n = s.count(1 + 4 + 11 * 8 + 4)?;
    let mut objects = Vec::with_capacity(n);
    for _ in 0..n {
        let class = ObjectClass::from_index(s.u8()? as usize)
            .ok_or_else(|| DatabaseError::Corrupt("unknown class tag".into()))?;
        let source_frame = s.u32()?;
        let pose = Pose { x: s.f64()?, y: s.f64()?, z: s.f64()?, theta: s.f64()? };
        let bbox = BoundingBox { cx: s.f64()?, cy: s.f64()?, cz: s.f64()?, l: s.f64()?, w: s.f64()?, h: s.f64()?, theta: s.f64()? };
        if !bbox.is_valid() {
            return Err(DatabaseError::Corrupt("invalid box".into()));
        }
        let np = s.count(32)?;
        let mut points = Vec::with_capacity(np);
        for _ in 0..np {
            points.push(Point { x: s.f64()?, y: s.f64()?, z: s.f64()?, r: s.f64()? });
        }
        objects.push(DbObject { object: LabeledObject::new(points, class, bbox), pose, source_frame });
    }
    s.finish()?;
    Ok(objects)
}

fn read_densities(mut s: Section) -> Result<DensityTable, DatabaseError> {
    let mut class_maxima: [Vec<u32>; 3] = Default::default();
    for maxima in &mut class_maxima {
        let n = s.count(4)?;
        *maxima = (0..n).map(|_| s.u32()).collect::<Result<_, _>>()?;
    }
    let n = s.count(4)?;
    let mut densities = Vec::with_capacity(n);
    for _ in 0..n {
        let len = s.count(8)?;
        let row: Vec<f64> = (0..len).map(|_| s.f64()).collect::<Result<_, _>>()?;
        if row.iter().any(|d| !(0.0..=1.0).contains(d)) {
            return Err(DatabaseError::Corrupt("density outside [0, 1]".into()));
        }
        densities.push(row);
    }
    s.finish()?;
    Ok(DensityTable { densities, class_maxima })
}

fn read_candidates(mut s: Section) -> Result<CandidateIndex, DatabaseError> {
    let n = s.count(4)?;
    let mut lists = Vec::with_capacity(n);
    for _ in 0..n {
        let len = s.count(4)?;
        lists.push((0..len).map(|_| s.u32()).collect::<Result<Vec<_>, _>>()?);
    }
    s.finish()?;
    Ok(CandidateIndex { lists })
}

/// Parses and validates a serialized database.
pub fn decode_database(bytes: &[u8]) -> Result<GtDatabase, DatabaseError> {
    if bytes.len() < 4 {
        return Err(DatabaseError::TruncatedSection("header"));
    }
    if &bytes[..4] != MAGIC {
        return Err(DatabaseError::BadMagic);
    }
    if bytes.len() < 8 {
        return Err(DatabaseError::TruncatedSection("header"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(DatabaseError::UnsupportedVersion(version));
    }
    let mut rest = &bytes[8..];
    let mut sections = Vec::with_capacity(SECTIONS.len());
    for name in SECTIONS {
        if rest.len() < 8 {
            return Err(DatabaseError::TruncatedSection(name));
        }
        let len = u64::from_le_bytes(rest[..8].try_into().unwrap());
        rest = &rest[8..];
        if (rest.len() as u64) < len {
            return Err(DatabaseError::TruncatedSection(name));
        }
        let (body, tail) = rest.split_at(len as usize);
        sections.push(Section { name, cur: Cursor::new(body) });
        rest = tail;
    }
    if !rest.is_empty() {
        return Err(DatabaseError::Corrupt("trailing bytes after the last section".into()));
    }
    let mut it = sections.into_iter();
    let (config, frame_ids) = read_metadata(it.next().unwrap())?;
    let objects = read_objects(it.next().unwrap())?;
    let densities = read_densities(it.next().unwrap())?;
    let candidates = read_candidates(it.next().unwrap())?;
    GtDatabase::from_parts(config, frame_ids, objects, densities, candidates)
}

pub fn load_database(path: &Path) -> Result<GtDatabase, DatabaseError> {
    let bytes = std::fs::read(path).map_err(|source| DatabaseError::Io { path: path.to_path_buf(), source })?;
    decode_database(&bytes)
}
