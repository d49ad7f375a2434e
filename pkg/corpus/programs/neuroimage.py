"""3D convolutional classifier for brain volumes stored as raw records."""
import tensorflow as tf

VOLUME = 16
N_CLASSES = 2


def read_volume(serialized):
    features = tf.parse_single_example(serialized, features={
        'image_raw': tf.FixedLenFeature([], tf.string),
        'label': tf.FixedLenFeature([], tf.int64),
    })
    image = tf.decode_raw(features['image_raw'], tf.float32)
    label = tf.cast(features['label'], tf.int32)
    return [image, label]


def conv3d_net(volumes, n_classes, dropout, reuse, is_training):
    with tf.variable_scope('brain_net', reuse=reuse):
        x = tf.reshape(volumes, shape=[-1, 16, 16, 16, 1])
        conv1 = tf.layers.conv3d(x, 16, 3, activation=tf.nn.relu)
        pool1 = tf.layers.max_pooling3d(conv1, 2, 2)
        conv2 = tf.layers.conv3d(pool1, 32, 3, activation=tf.nn.relu)
        pool2 = tf.layers.max_pooling3d(conv2, 2, 2)
        fc1 = tf.contrib.layers.flatten(pool2)
        fc1 = tf.layers.dense(fc1, 256)
        fc1 = tf.layers.dropout(fc1, rate=dropout, training=is_training)
        out = tf.layers.dense(fc1, n_classes)
    return out


def train(filename):
    reader = tf.TFRecordReader()
    queue = tf.train.string_input_producer([filename])
    record = reader.read(queue)
    pair = read_volume(record[1])
    batch = tf.train.shuffle_batch(pair, batch_size=8, capacity=64, min_after_dequeue=16)
    images = batch[0]
    labels = batch[1]

    logits = conv3d_net(images, N_CLASSES, 0.25, False, True)
    loss = tf.reduce_mean(tf.nn.sparse_softmax_cross_entropy_with_logits(
        logits=logits, labels=labels))
    train_op = tf.train.AdamOptimizer(0.001).minimize(loss)

    sess = tf.Session()
    sess.run(tf.global_variables_initializer())
    step = 0
    while step < 100:
        sess.run(train_op)
        step = step + 1
    sess.close()


train('/data/brains.tfrecords')
