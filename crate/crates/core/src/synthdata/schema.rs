use crate::error::{Error, Result};
use crate::kv::{format_list, KvMap};

/// Classes and per-class slot counts, plus the fixed slot ordering every
/// stage agrees on: class index first, then slot index within the class.
/// Class 0 is the background and owns slot 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SceneSchema {
    classes: Vec<String>,
    slots_per_class: Vec<usize>,
}

impl SceneSchema {
    pub fn new(classes: Vec<String>, slots_per_class: Vec<usize>) -> Result<Self> {
        if classes.is_empty() || classes.len() != slots_per_class.len() {
            return Err(Error::SchemaMismatch(format!(
                "{} class names but {} slot counts",
                classes.len(),
                slots_per_class.len()
            )));
        }
        if slots_per_class[0] != 1 {
            return Err(Error::SchemaMismatch(format!(
                "background class must own exactly one slot, got {}",
                slots_per_class[0]
            )));
        }
        let total: usize = slots_per_class.iter().sum();
        if total > u8::MAX as usize {
            return Err(Error::SchemaMismatch(format!("{total} slots exceed the u8 mask range")));
        }
        Ok(Self {
            classes,
            slots_per_class,
        })
    }

    /// Background plus `n` slots of a single foreground class.
    pub fn single_class(name: &str, n: usize) -> Self {
        Self::new(vec!["background".into(), name.into()], vec![1, n]).expect("valid schema")
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn slots_per_class(&self) -> &[usize] {
        &self.slots_per_class
    }

    /// m: number of classes, background included.
    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    /// N: total number of slots, background included.
    pub fn n_slots(&self) -> usize {
        self.slots_per_class.iter().sum()
    }

    pub fn n_foreground(&self) -> usize {
        self.n_slots() - 1
    }

    /// Class id of every slot, in slot order.
    pub fn slot_classes(&self) -> Vec<usize> {
        self.slots_per_class
            .iter()
            .enumerate()
            .flat_map(|(c, &n)| std::iter::repeat_n(c, n))
            .collect()
    }

    pub fn class_of(&self, slot: usize) -> Option<usize> {
        self.slot_classes().get(slot).copied()
    }

    /// Slots belonging to class `c`, in slot order.
    pub fn slots_of(&self, class: usize) -> Vec<usize> {
        self.slot_classes()
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == class)
            .map(|(s, _)| s)
            .collect()
    }

    pub fn to_kv(&self) -> KvMap {
        let mut kv = KvMap::new();
        kv.insert("classes", self.classes.join(","));
        kv.insert("slots_per_class", format_list(&self.slots_per_class));
        kv
    }

    pub fn from_kv(kv: &KvMap) -> std::result::Result<Self, String> {
        let classes = kv.parse_list::<String>("classes")?;
        let slots = kv.parse_list::<usize>("slots_per_class")?;
        Self::new(classes, slots).map_err(|e| e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slot_order_is_class_major() {
        let s = SceneSchema::new(
            vec!["background".into(), "bottle".into(), "pot".into()],
            vec![1, 2, 2],
        )
        .unwrap();
        assert_eq!(s.n_slots(), 5);
        assert_eq!(s.n_classes(), 3);
        assert_eq!(s.slot_classes(), vec![0, 1, 1, 2, 2]);
        assert_eq!(s.slots_of(2), vec![3, 4]);
    }

    #[test]
    fn background_must_have_one_slot() {
        assert!(SceneSchema::new(vec!["bg".into()], vec![2]).is_err());
        assert!(SceneSchema::new(vec!["bg".into(), "x".into()], vec![1]).is_err());
        let only_bg = SceneSchema::new(vec!["bg".into()], vec![1]).unwrap();
        assert_eq!(only_bg.n_foreground(), 0);
    }

    #[test]
    fn kv_round_trip() {
        let s = SceneSchema::single_class("ball", 2);
        assert_eq!(SceneSchema::from_kv(&s.to_kv()).unwrap(), s);
    }
}
