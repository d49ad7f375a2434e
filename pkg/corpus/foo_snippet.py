class Foo(object):
  def foo(self, a):
    return self.contents+a

x = Foo()
y = x.foo

x.foo(3)
Foo.foo(x, 3)
y(3)

x.foo = Foo.foo
x.foo(x, 3)
