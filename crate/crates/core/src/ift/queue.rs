use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

/// Largest maximum arc weight served by the bucket queue; heavier graphs fall
/// back to the binary heap.
pub const BUCKET_BUDGET: u32 = 1 << 16;

/// Monotone priority queue over node ids with FIFO order among equal keys.
///
/// Entries are never decreased in place: a node is pushed again when its
/// cost drops and the caller skips stale pops.
pub(crate) enum FifoQueue {
    Bucket(BucketQueue),
    Heap(HeapQueue),
}

impl FifoQueue {
    pub fn for_max_key(max_key: u32) -> Self {
        if max_key <= BUCKET_BUDGET {
            FifoQueue::Bucket(BucketQueue::new(max_key))
        } else {
            FifoQueue::Heap(HeapQueue::default())
        }
    }

    #[inline]
    pub fn push(&mut self, key: u32, node: usize) {
        match self {
            FifoQueue::Bucket(q) => q.push(key, node),
            FifoQueue::Heap(q) => q.push(key, node),
        }
    }

    #[inline]
    pub fn pop(&mut self) -> Option<(u32, usize)> {
        match self {
            FifoQueue::Bucket(q) => q.pop(),
            FifoQueue::Heap(q) => q.pop(),
        }
    }
}

/// Dial queue. Keys popped are non-decreasing, so a single forward cursor
/// suffices.
pub(crate) struct BucketQueue {
    buckets: Vec<VecDeque<usize>>,
    cursor: usize,
    len: usize,
}

impl BucketQueue {
    fn new(max_key: u32) -> Self {
        Self {
            buckets: (0..=max_key as usize).map(|_| VecDeque::new()).collect(),
            cursor: 0,
            len: 0,
        }
    }

    fn push(&mut self, key: u32, node: usize) {
        let key = key as usize;
        debug_assert!(key >= self.cursor, "bucket queue requires monotone keys");
        self.buckets[key].push_back(node);
        self.len += 1;
    }

    fn pop(&mut self) -> Option<(u32, usize)> {
        if self.len == 0 {
            return None;
        }
        while self.buckets[self.cursor].is_empty() {
            self.cursor += 1;
        }
        self.len -= 1;
        let node = self.buckets[self.cursor].pop_front()?;
        Some((self.cursor as u32, node))
    }
}

#[derive(Default)]
pub(crate) struct HeapQueue {
    heap: BinaryHeap<Reverse<(u32, u64, usize)>>,
    seq: u64,
}

impl HeapQueue {
    fn push(&mut self, key: u32, node: usize) {
        self.heap.push(Reverse((key, self.seq, node)));
        self.seq += 1;
    }

    fn pop(&mut self) -> Option<(u32, usize)> {
        self.heap.pop().map(|Reverse((k, _, n))| (k, n))
    }
}
