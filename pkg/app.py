from wlantrace.cli import trace

if __name__ == '__main__':
    trace()
